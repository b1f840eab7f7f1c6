"""Robust separable NMF.

Anchor rows are found either by the self-representation LP (the reference
path: minimize p^T diag(C) subject to ||X - C X||_{inf,1} <= 2*eps, C >= 0,
C_ii <= 1, C_ji <= C_ii) or, above ``lp_max_rows``, by successive projection.
The mixing matrix is recovered by a row-stochastic (inf,1)-norm fit and the
full factor by blockwise least squares.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import lp
from .errors import DimensionError, NumericError, ParameterError, RecoveryError, SingularityError
from .linalg import as_matrix, least_squares

__all__ = [
    "HottopixConfig",
    "NmfEstimate",
    "default_p_vector",
    "hottopix",
    "spa_anchors",
    "fit_A",
    "fit_W_blocks",
    "RobustSeparableNMF",
]

LP_MAX_ROWS = 200


def default_p_vector(n_rows):
    """Distinct positive objective weights: p_i = 1 + i/(n_rows+1)."""
    return 1.0 + np.arange(n_rows) / (n_rows + 1.0)


@dataclass
class HottopixConfig:
    """Knobs for anchor detection on one matrix."""

    m: int
    epsilon: float = 0.0
    p_vector: np.ndarray | None = None
    anchor_threshold: float = 0.5
    lp_max_rows: int = LP_MAX_ROWS

    def validate(self, n_rows):
        if self.m < 1:
            raise ParameterError(f"latent dimension must be >= 1, got {self.m}")
        if self.epsilon < 0:
            raise ParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0 < self.anchor_threshold < 1:
            raise ParameterError("anchor_threshold must lie in (0, 1)")
        p = self.p_vector if self.p_vector is not None else default_p_vector(n_rows)
        p = np.asarray(p, dtype=float)
        if p.shape != (n_rows,):
            raise DimensionError(f"p_vector length {p.shape} for {n_rows} rows")
        if np.any(p <= 0) or len(np.unique(p)) != n_rows:
            raise ParameterError("p_vector entries must be distinct and positive")
        return p


@dataclass
class NmfEstimate:
    """Recovered factors: X ~ A_hat @ W_hat with W_hat = X[anchor_rows]."""

    W_hat: np.ndarray
    A_hat: np.ndarray
    anchor_rows: list = field(default_factory=list)


def _self_representation_lp(X, p, epsilon):
    """Solve the anchor LP and return the diagonal of the optimal C."""
    L, n = X.shape
    n_c, n_e = L * L, L * n
    diag_idx = np.arange(L) * L + np.arange(L)

    c = np.zeros(n_c + n_e)
    c[diag_idx] = p

    rows, cols, vals, rhs, rel = [], [], [], [], []
    r = 0
    col_base = np.arange(L)
    for i in range(L):
        e_off = n_c + i * n
        c_off = i * L
        for j in range(n):
            # X_ij - (C X)_ij <= e_ij   and   (C X)_ij - X_ij <= e_ij
            rows.extend([r] * (L + 1))
            cols.extend((c_off + col_base).tolist())
            cols.append(e_off + j)
            vals.extend((-X[:, j]).tolist())
            vals.append(-1.0)
            rhs.append(-X[i, j])
            rel.append("<=")
            r += 1
            rows.extend([r] * (L + 1))
            cols.extend((c_off + col_base).tolist())
            cols.append(e_off + j)
            vals.extend(X[:, j].tolist())
            vals.append(-1.0)
            rhs.append(X[i, j])
            rel.append("<=")
            r += 1
    for i in range(L):  # per-row l1 residual budget
        rows.extend([r] * n)
        cols.extend(range(n_c + i * n, n_c + (i + 1) * n))
        vals.extend([1.0] * n)
        rhs.append(2.0 * epsilon)
        rel.append("<=")
        r += 1
    for i in range(L):  # C_ii <= 1
        rows.append(r)
        cols.append(diag_idx[i])
        vals.append(1.0)
        rhs.append(1.0)
        rel.append("<=")
        r += 1
    for i in range(L):  # C_ji <= C_ii
        for j in range(L):
            if i == j:
                continue
            rows.extend([r, r])
            cols.extend([j * L + i, diag_idx[i]])
            vals.extend([1.0, -1.0])
            rhs.append(0.0)
            rel.append("<=")
            r += 1

    A = sp.csr_matrix((vals, (rows, cols)), shape=(r, n_c + n_e))
    program = lp.LinearProgram.from_matrix(c, A, rel, np.asarray(rhs))
    sol = lp.solve(program)
    if sol.status != "optimal":
        raise RecoveryError(
            f"anchor LP terminated with status {sol.status!r}; the tolerance "
            f"eps={epsilon} may be too small for the noise level"
        )
    return sol.x[diag_idx]


def _l1_distance_to_span(x, basis_rows):
    """l1 distance from x to the linear span of the given rows (a small LP)."""
    if len(basis_rows) == 0:
        return float(np.abs(x).sum())
    B = np.asarray(basis_rows)
    k, n = B.shape
    # variables: lam+ (k), lam- (k), e (n); min sum e, |x - lam^T B| <= e
    c = np.concatenate([np.zeros(2 * k), np.ones(n)])
    rows = []
    eye = np.eye(n)
    for j in range(n):
        rows.append((np.concatenate([B[:, j], -B[:, j], -eye[j]]), "<=", x[j]))
        rows.append((np.concatenate([-B[:, j], B[:, j], -eye[j]]), "<=", -x[j]))
    sol = lp.solve(lp.LinearProgram(objective=c, constraints=rows))
    if sol.status != "optimal":
        raise NumericError("distance LP failed")
    return float(sol.objective_value)


def _select_anchors(diag, X, m, threshold):
    """Threshold the LP diagonal, then trim or pad to exactly m anchors."""
    anchors = [int(i) for i in np.where(diag >= threshold)[0]]
    if len(anchors) > m:
        # keep the m largest diagonal weights, lowest index on ties
        order = sorted(anchors, key=lambda i: (-diag[i], i))
        anchors = sorted(order[:m])
    while len(anchors) < m:
        dists = np.array(
            [
                -1.0 if i in anchors else _l1_distance_to_span(X[i], X[anchors])
                for i in range(X.shape[0])
            ]
        )
        anchors.append(int(np.argmax(dists)))
        anchors.sort()
    return anchors


def hottopix(X_tilde, cfg: HottopixConfig):
    """Anchor detection on X_tilde; returns (anchor_rows, W_hat).

    W_hat is X_tilde restricted to the anchor rows. Dispatches to
    :func:`spa_anchors` when the row count exceeds ``cfg.lp_max_rows``.
    """
    X = as_matrix(X_tilde, "X_tilde")
    L, _ = X.shape
    if L < cfg.m:
        raise DimensionError(f"need at least m={cfg.m} rows, got {L}")
    p = cfg.validate(L)
    if L > cfg.lp_max_rows:
        anchors = list(spa_anchors(X, cfg.m))
        anchors = _select_anchors(np.zeros(L), X, cfg.m, 1.0) if not anchors else anchors
        while len(anchors) < cfg.m:  # rank-deficient input: pad like the LP path
            anchors = _select_anchors(np.zeros(L), X, cfg.m, 2.0)
        return anchors, X[anchors].copy()
    diag = _self_representation_lp(X, p, cfg.epsilon)
    anchors = _select_anchors(diag, X, cfg.m, cfg.anchor_threshold)
    return anchors, X[anchors].copy()


def spa_anchors(X_tilde, m):
    """Successive projection: m rows of (residual) maximal l2 norm.

    Emits a warning and returns fewer indices when the matrix has rank < m.
    """
    X = as_matrix(X_tilde, "X_tilde")
    L, _ = X.shape
    if L < m:
        raise DimensionError(f"need at least m={m} rows, got {L}")
    R = X.copy()
    anchors: list[int] = []
    norms0 = np.linalg.norm(X, axis=1)
    tol = 1e-10 * (norms0.max() if norms0.max() > 0 else 1.0)
    for _ in range(m):
        norms = np.linalg.norm(R, axis=1)
        norms[anchors] = -1.0
        j = int(np.argmax(norms))
        if norms[j] <= tol:
            warnings.warn(
                f"input rank {len(anchors)} < m={m}; returning fewer anchors",
                RuntimeWarning,
                stacklevel=2,
            )
            break
        anchors.append(j)
        u = R[j] / np.linalg.norm(R[j])
        R = R - np.outer(R @ u, u)
    return anchors


def fit_A(F_hat, W_hat):
    """Row-stochastic Z >= 0 minimizing max-row l1 residual ||F - Z W||_{inf,1}.

    Solved as one LP with a shared bound on every row's l1 error.
    """
    F = as_matrix(F_hat, "F_hat")
    W = as_matrix(W_hat, "W_hat")
    if F.shape[1] != W.shape[1]:
        raise DimensionError(f"column mismatch: F {F.shape} vs W {W.shape}")
    L, n = F.shape
    m = W.shape[0]
    n_z, n_e = L * m, L * n
    tau = n_z + n_e  # index of the shared max variable

    c = np.zeros(n_z + n_e + 1)
    c[tau] = 1.0

    rows, cols, vals, rhs, rel = [], [], [], [], []
    r = 0
    base = np.arange(m)
    for i in range(L):
        z_off = i * m
        e_off = n_z + i * n
        for j in range(n):
            rows.extend([r] * (m + 1))
            cols.extend((z_off + base).tolist())
            cols.append(e_off + j)
            vals.extend((-W[:, j]).tolist())
            vals.append(-1.0)
            rhs.append(-F[i, j])
            rel.append("<=")
            r += 1
            rows.extend([r] * (m + 1))
            cols.extend((z_off + base).tolist())
            cols.append(e_off + j)
            vals.extend(W[:, j].tolist())
            vals.append(-1.0)
            rhs.append(F[i, j])
            rel.append("<=")
            r += 1
        rows.extend([r] * (n + 1))
        cols.extend(range(e_off, e_off + n))
        cols.append(tau)
        vals.extend([1.0] * n)
        vals.append(-1.0)
        rhs.append(0.0)
        rel.append("<=")
        r += 1
        rows.extend([r] * m)
        cols.extend((z_off + base).tolist())
        vals.extend([1.0] * m)
        rhs.append(1.0)
        rel.append("=")
        r += 1

    A = sp.csr_matrix((vals, (rows, cols)), shape=(r, n_z + n_e + 1))
    sol = lp.solve(lp.LinearProgram.from_matrix(c, A, rel, np.asarray(rhs)))
    if sol.status != "optimal":
        raise NumericError(f"row-stochastic fit LP status {sol.status!r}")
    Z = sol.x[:n_z].reshape(L, m)
    # project exactly onto the constraint set (solver residual <= 1e-6)
    Z = np.clip(Z, 0.0, None)
    Z /= Z.sum(axis=1, keepdims=True)
    return Z


def fit_W_blocks(A_hat, plan, M_hats):
    """Assemble the m x K factor blockwise via least squares.

    Block i solves min_X ||A_hat[S(i), :] X - M_hat_i||_F and fills that
    block's columns; the final block covers the K mod m remainder columns.
    """
    A = as_matrix(A_hat, "A_hat")
    m = A.shape[1]
    if len(M_hats) != plan.n_blocks:
        raise DimensionError(
            f"{len(M_hats)} sample matrices for {plan.n_blocks} blocks"
        )
    W = np.zeros((m, plan.K))
    for i, (ctx, arms) in enumerate(zip(plan.context_blocks, plan.arm_blocks)):
        M = as_matrix(M_hats[i], f"M_hat_{i}")
        if M.shape != (len(ctx), len(arms)):
            raise DimensionError(
                f"block {i}: samples {M.shape} vs expected {(len(ctx), len(arms))}"
            )
        try:
            X = least_squares(A[ctx, :], M)
        except SingularityError as err:
            raise SingularityError(
                f"block {i}: rank-deficient context submatrix "
                f"(sigma_min={err.sigma_min:.3e})",
                sigma_min=err.sigma_min,
                block=i,
            ) from err
        W[:, arms] = X
    return W


class RobustSeparableNMF(TransformerMixin, BaseEstimator):
    """Separable NMF as an estimator: fit finds anchors, transform fits weights.

    After ``fit(X)``, ``components_`` holds the anchor rows (W_hat) and
    ``transform(X)`` returns the row-stochastic weights Z with X ~ Z W_hat.
    """

    def __init__(
        self,
        n_components=2,
        epsilon=0.0,
        anchor_method="lp_hottopix",
        anchor_threshold=0.5,
        lp_max_rows=LP_MAX_ROWS,
    ):
        self.n_components = n_components
        self.epsilon = epsilon
        self.anchor_method = anchor_method
        self.anchor_threshold = anchor_threshold
        self.lp_max_rows = lp_max_rows

    def fit(self, X, y=None):
        X = as_matrix(X, "X")
        if self.anchor_method == "spa":
            anchors = spa_anchors(X, self.n_components)
            W = X[anchors].copy()
        elif self.anchor_method == "lp_hottopix":
            anchors, W = hottopix(
                X,
                HottopixConfig(
                    m=self.n_components,
                    epsilon=self.epsilon,
                    anchor_threshold=self.anchor_threshold,
                    lp_max_rows=self.lp_max_rows,
                ),
            )
        else:
            raise ParameterError(f"unknown anchor_method {self.anchor_method!r}")
        self.anchor_rows_ = list(anchors)
        self.components_ = W
        return self

    def transform(self, X):
        if not hasattr(self, "components_"):
            raise NotFittedError("call fit before transform")
        return fit_A(as_matrix(X, "X"), self.components_)
