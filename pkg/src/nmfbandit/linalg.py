"""Dense matrix primitives: norms, singular values, least squares, and the
mean-zero separation functionals used by the factor-quality checkers.

Matrices are plain 2-D float64 ``numpy`` arrays throughout the package; the
:func:`as_matrix` validator is the single entry point that enforces that.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParameterError, SingularityError

__all__ = [
    "as_matrix",
    "norm_inf1",
    "norm_inf_inf",
    "singular_values",
    "mean_zero_basis",
    "psi_m",
    "psi1_m",
    "least_squares",
]

PSI1_MAX_DIM = 12

RANK_RTOL = 1e-10


def as_matrix(M, name="matrix"):
    """Validate and return *M* as a 2-D float64 array with finite entries."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={A.ndim}")
    if A.size == 0:
        raise DimensionError(f"{name} must be nonempty, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DimensionError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(A)


def norm_inf1(M):
    """Maximum row l1 norm, ||M||_{inf,1}."""
    A = as_matrix(M)
    return float(np.abs(A).sum(axis=1).max())


def norm_inf_inf(M):
    """Maximum absolute entry, ||M||_{inf,inf}."""
    A = as_matrix(M)
    return float(np.abs(A).max())


def singular_values(M):
    """All singular values of *M*, sorted descending.

    Length is min(rows, cols); values are nonnegative and satisfy
    ||M||_F^2 = sum(sigma_i^2) to high relative accuracy.
    """
    A = as_matrix(M)
    return np.linalg.svd(A, compute_uv=False)


def mean_zero_basis(m):
    """Orthonormal basis (m x (m-1)) of the subspace {a : a^T 1 = 0}.

    Helmert construction: column k has k ones followed by -k, scaled to unit
    norm. Deterministic, so downstream values are reproducible.
    """
    if m < 2:
        raise ParameterError(f"mean-zero subspace needs m >= 2, got m={m}")
    Q = np.zeros((m, m - 1))
    for k in range(1, m):
        Q[:k, k - 1] = 1.0
        Q[k, k - 1] = -float(k)
        Q[:, k - 1] /= np.sqrt(k * (k + 1))
    return Q


def psi_m(P):
    """Smallest l2 gain of P on mean-zero directions.

    inf over {a != 0, a^T 1 = 0} of ||a^T P||_2 / ||a||_2, computed exactly as
    the smallest singular value of Q^T P where Q spans the mean-zero subspace.
    """
    A = as_matrix(P)
    m, m_cols = A.shape
    if m < 2:
        raise ParameterError("psi_m is undefined for a single row (m=1)")
    if m_cols < m:
        raise DimensionError(f"psi_m needs cols >= rows, got {A.shape}")
    Q = mean_zero_basis(m)
    return float(singular_values(Q.T @ A)[-1])


def psi1_m(P, max_dim=PSI1_MAX_DIM):
    """Smallest l1 gain of P on mean-zero directions.

    inf over {a != 0, a^T 1 = 0} of ||a^T P||_1 / ||a||_1. Solved exactly by
    enumerating the 2^(m-1)-1 mixed sign patterns of a; within one pattern the
    substitution a_i = s_i b_i (b >= 0) makes the problem a small LP.
    """
    A = as_matrix(P)
    m, m_cols = A.shape
    if m < 2:
        raise ParameterError("psi1_m is undefined for a single row (m=1)")
    if m > max_dim:
        raise ParameterError(
            f"psi1_m enumerates 2^(m-1) sign patterns; m={m} exceeds the "
            f"configured cap {max_dim}"
        )
    if m_cols < m:
        raise DimensionError(f"psi1_m needs cols >= rows, got {A.shape}")

    from .lp import LinearProgram, solve  # local import: lp depends on errors only

    best = np.inf
    n = m_cols
    # Sign patterns with s[0] = +1 (a -> -a symmetry) and at least one -1.
    for bits in range(1, 2 ** (m - 1)):
        s = np.ones(m)
        for i in range(m - 1):
            if (bits >> i) & 1:
                s[i + 1] = -1.0
        # Variables: b (m) >= 0, e (n) >= 0.
        # minimize sum(e)  s.t.  -e <= (s*b)^T A <= e,  sum(s*b) = 0, sum(b) = 1.
        c = np.concatenate([np.zeros(m), np.ones(n)])
        SA = (s[:, None] * A).T  # n x m, rows are columns of A weighted by s
        rows = []
        for j in range(n):
            rows.append((np.concatenate([SA[j], -np.eye(n)[j]]), "<=", 0.0))
            rows.append((np.concatenate([-SA[j], -np.eye(n)[j]]), "<=", 0.0))
        rows.append((np.concatenate([s, np.zeros(n)]), "=", 0.0))
        rows.append((np.concatenate([np.ones(m), np.zeros(n)]), "=", 1.0))
        sol = solve(LinearProgram(objective=c, constraints=rows))
        if sol.status == "optimal" and sol.objective_value < best:
            best = sol.objective_value
    return float(max(best, 0.0))


def least_squares(A, B):
    """Solve min_X ||A X - B||_F for full-column-rank A.

    Raises :class:`SingularityError` (carrying sigma_min) when the smallest
    singular value of A falls below RANK_RTOL times the largest.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[0] != B.shape[0]:
        raise DimensionError(f"row mismatch: A {A.shape} vs B {B.shape}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= RANK_RTOL * s[0]:
        raise SingularityError(
            f"matrix is rank deficient (sigma_min={s[-1]:.3e}, sigma_max={s[0]:.3e})",
            sigma_min=float(s[-1]),
        )
    return Vt.T @ ((U.T @ B) / s[:, None])
