"""Instance generators and factor-quality checkers.

Three instance families: the plain simulation model (simplex mixing rows,
uniform rewards, a corrupted fraction of entries), the semi-random
deterministic+random composition model, and the block-structured family used
for lower-bound evaluation. The checkers estimate how often random
row/column submatrices of the factors stay well conditioned.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericError, ParameterError
from .linalg import as_matrix, psi1_m, singular_values

__all__ = [
    "RewardModel",
    "BanditInstance",
    "TheoryModelParams",
    "generate_simple",
    "generate_theory",
    "generate_lower_bound",
    "lower_bound_value",
    "check_wstrip_l1",
    "check_wstrip_l2",
    "wstrip_l1_values",
    "wstrip_l2_values",
    "anchor_row_indices",
]


@dataclass
class RewardModel:
    """Reward distribution around a mean entry of U."""

    kind: str = "bernoulli"  # "bernoulli" | "uniform"
    width: float = 0.0  # support length for the uniform kind

    def validate(self, U=None):
        if self.kind not in ("bernoulli", "uniform"):
            raise ParameterError(f"unknown reward model {self.kind!r}")
        if self.kind == "uniform" and self.width <= 0:
            raise ParameterError("uniform reward model needs width > 0")
        if self.kind == "bernoulli" and U is not None:
            if U.min() < -1e-12 or U.max() > 1 + 1e-12:
                raise ParameterError(
                    "Bernoulli rewards require mean entries in [0, 1]; "
                    f"got range [{U.min():.4g}, {U.max():.4g}]"
                )

    def draw(self, mean, rng):
        if self.kind == "bernoulli":
            return float(rng.random() < mean)
        return float(mean + self.width * (rng.random() - 0.5))


@dataclass
class BanditInstance:
    """Ground truth for one bandit problem: U (= A W when factors exist),
    the context distribution, the reward model, and the derived gap."""

    U: np.ndarray
    A: np.ndarray | None = None
    W: np.ndarray | None = None
    beta: np.ndarray | None = None
    reward_model: RewardModel = field(default_factory=RewardModel)
    gap: float = field(init=False, default=0.0)
    beta_cdf: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        self.U = as_matrix(self.U, "U")
        if self.A is not None:
            self.A = as_matrix(self.A, "A")
        if self.W is not None:
            self.W = as_matrix(self.W, "W")
        if self.beta is None:
            self.beta = np.full(self.L, 1.0 / self.L)
        self.beta = np.asarray(self.beta, dtype=float)
        self.beta_cdf = np.cumsum(self.beta)
        self.gap = self._compute_gap()

    @property
    def L(self):
        return self.U.shape[0]

    @property
    def K(self):
        return self.U.shape[1]

    def _compute_gap(self):
        if self.K < 2:
            return 0.0
        part = np.partition(self.U, self.K - 2, axis=1)
        return float((part[:, -1] - part[:, -2]).min())

    def validate(self, require_gap=True):
        """Check structural invariants; generators call this at construction."""
        if self.beta.shape != (self.L,):
            raise DimensionError("beta length must equal the number of contexts")
        if np.any(self.beta <= 0) or abs(self.beta.sum() - 1.0) > 1e-9:
            raise ParameterError("beta must be strictly positive and sum to 1")
        if (self.A is None) != (self.W is None):
            raise ParameterError("A and W must be supplied together")
        if self.A is not None:
            if self.A.shape[0] != self.L or self.W.shape[1] != self.K:
                raise DimensionError("factor shapes inconsistent with U")
            if self.A.shape[1] != self.W.shape[0]:
                raise DimensionError("inner factor dimensions disagree")
            if np.abs(self.U - self.A @ self.W).max() > 1e-10:
                raise ParameterError("U does not equal A @ W")
            if self.A.min() < 0 or self.W.min() < 0:
                raise ParameterError("factors must be nonnegative")
            if np.abs(self.A.sum(axis=1) - 1.0).max() > 1e-9:
                raise ParameterError("rows of A must sum to 1")
        self.reward_model.validate(self.U)
        if require_gap and self.gap <= 0:
            raise ParameterError("instance has a zero-gap context row")
        if not require_gap and self.gap <= 0:
            warnings.warn(
                "instance contains a tied best arm; gap reported as 0",
                RuntimeWarning,
                stacklevel=2,
            )
        return self


def anchor_row_indices(A, tol=1e-12):
    """Rows of A that are exactly unit vectors (one per latent class kept)."""
    A = as_matrix(A, "A")
    found = {}
    for i, row in enumerate(A):
        j = int(np.argmax(row))
        if abs(row[j] - 1.0) <= tol and np.abs(np.delete(row, j)).max() <= tol:
            found.setdefault(j, i)
    return sorted(found.values())


def _simplex_rows(rng, n, m):
    """n rows drawn uniformly from the m-simplex via sorted uniform gaps."""
    if m == 1:
        return np.ones((n, 1))
    cuts = np.sort(rng.random((n, m - 1)), axis=1)
    padded = np.concatenate([np.zeros((n, 1)), cuts, np.ones((n, 1))], axis=1)
    return np.diff(padded, axis=1)


def generate_simple(L, K, m, corrupt_frac, seed, reward_model=None):
    """Simplex-mixed instance: A rows uniform on the simplex with m rows
    overwritten as anchors, W uniform in [0, 1] with a corrupted fraction of
    each row replaced by adversarially seeded values (still in [0, 1])."""
    if m > min(L, K) or m < 1:
        raise DimensionError(f"need 1 <= m <= min(L, K); got m={m}, L={L}, K={K}")
    if not 0 <= corrupt_frac <= 0.2:
        raise ParameterError(f"corrupt_frac must be in [0, 0.2], got {corrupt_frac}")
    main_ss, adv_ss = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(main_ss)
    adv = np.random.default_rng(adv_ss)

    A = _simplex_rows(rng, L, m)
    anchor_rows = np.sort(rng.choice(L, size=m, replace=False))
    A[anchor_rows] = np.eye(m)

    W = rng.random((m, K))
    n_corrupt = int(round(corrupt_frac * K))
    for i in range(m):
        if n_corrupt:
            cols = adv.choice(K, size=n_corrupt, replace=False)
            W[i, cols] = adv.random(n_corrupt)

    inst = BanditInstance(
        U=A @ W,
        A=A,
        W=W,
        reward_model=reward_model or RewardModel("bernoulli"),
    )
    return inst.validate()


@dataclass
class TheoryModelParams:
    """Parameters of the deterministic+random composition model."""

    L: int
    K: int
    m: int
    det_col_frac: float = 0.01
    det_row_frac: float = 1.0 / 18.0
    gamma: float = 0.65
    q: float = 0.003
    noise_perturbation_norm: float = 0.2
    trunc_radius: float | None = None  # default 2.5 * sqrt(q)
    seed: int = 0

    def validate(self):
        m = self.m
        if m < 1 or m > min(self.L, self.K):
            raise DimensionError("need 1 <= m <= min(L, K)")
        if not 0 <= self.det_col_frac <= 1.0 / (32 * m):
            raise ParameterError(
                f"det_col_frac must be in [0, 1/(32m)] = [0, {1.0 / (32 * m):.4g}]"
            )
        if not 0 < self.det_row_frac <= 1.0 / 18.0:
            raise ParameterError("det_row_frac must be in (0, 1/18]")
        if not 0 < self.gamma < 1:
            raise ParameterError("gamma must be in (0, 1)")
        if m * self.gamma < 1:
            raise ParameterError("need m * gamma >= 1 for row-stochastic rows capped at gamma")
        if self.q <= 0:
            raise ParameterError("q must be > 0")
        if self.noise_perturbation_norm < 0:
            raise ParameterError("noise_perturbation_norm must be >= 0")
        if int(round(self.det_row_frac * self.L)) < m:
            raise ParameterError(
                "deterministic row block must be able to hold the m anchor rows"
            )
        return self

    @property
    def radius(self):
        return 2.5 * np.sqrt(self.q) if self.trunc_radius is None else self.trunc_radius


def _truncated_gaussian(rng, shape, std, radius, max_draws=10**6):
    """Mean-zero N(0, std^2) samples rejected outside [-radius, radius]."""
    out = np.empty(int(np.prod(shape)))
    filled = 0
    drawn = 0
    while filled < out.size:
        batch = rng.normal(0.0, std, size=max(out.size - filled, 1024))
        drawn += batch.size
        keep = batch[np.abs(batch) <= radius]
        take = min(keep.size, out.size - filled)
        out[filled : filled + take] = keep[:take]
        filled += take
        if drawn > max_draws and filled < out.size:
            raise ParameterError(
                f"truncated-gaussian rejection failed after {drawn} draws; "
                f"radius {radius:.3g} is too tight for std {std:.3g}"
            )
    return out.reshape(shape)


def _capped_simplex_row(adv, m, gamma):
    """Deterministic simplex row with every entry <= gamma."""
    v = _simplex_rows(adv, 1, m)[0]
    top = v.max()
    if top > gamma:
        # mix toward uniform just enough to cap the largest entry
        lam = (gamma - 1.0 / m) / (top - 1.0 / m)
        v = lam * v + (1 - lam) / m
    return v


def generate_theory(params: TheoryModelParams):
    """Instance from the deterministic+random composition model.

    W: a deterministic column block (holding each row's maximum) plus a
    random block of per-column mean shifts, a bounded deterministic
    perturbation, and truncated-gaussian noise with variance q. A: a
    deterministic row block containing the m anchor rows (other rows capped
    at gamma) plus row-normalized capped-support random rows.
    """
    p = params.validate()
    L, K, m = p.L, p.K, p.m
    radius = p.radius
    main_ss, adv_ss = np.random.SeedSequence(p.seed).spawn(2)
    rng = np.random.default_rng(main_ss)
    adv = np.random.default_rng(adv_ss)

    # --- W ---
    n_d = int(p.det_col_frac * K)
    det_cols = np.sort(adv.choice(K, size=n_d, replace=False)) if n_d else np.array([], dtype=int)
    rand_cols = np.setdiff1d(np.arange(K), det_cols)
    W = np.zeros((m, K))

    hi_cap = 0.93 if n_d else 1.0
    means = 0.45 + 0.10 * adv.random(rand_cols.size)  # per-column shifts in [0.45, 0.55]
    slack = min(means.min(), hi_cap - means.max()) - radius
    if slack <= 0:
        raise ParameterError(
            f"support infeasible: truncation radius {radius:.3g} leaves no room "
            f"inside [0, {hi_cap}] around the column means"
        )
    # deterministic per-column perturbation, scaled to l2 norm r_cap per column
    # (entry magnitudes are then <= r_cap, which keeps the support inside [0,1])
    r_cap = min(p.noise_perturbation_norm, slack)
    R = adv.uniform(-1.0, 1.0, size=(m, rand_cols.size))
    col_norms = np.linalg.norm(R, axis=0)
    col_norms[col_norms == 0] = 1.0
    R = R / col_norms * (r_cap * 0.999)
    noise = _truncated_gaussian(rng, (m, rand_cols.size), np.sqrt(p.q), radius)
    W[:, rand_cols] = means[None, :] + R + noise

    if n_d:
        W[:, det_cols] = adv.uniform(0.0, 0.9, size=(m, n_d))
        max_cols = det_cols[np.arange(m) % n_d]
        W[np.arange(m), max_cols] = 0.95 + 0.04 * adv.random(m)

    if W.min() < 0 or W.max() > 1:
        raise NumericError("generated W escaped [0, 1]; parameter check is broken")

    # --- A ---
    n_e = int(round(p.det_row_frac * L))
    det_rows = np.sort(rng.choice(L, size=n_e, replace=False))
    anchor_rows = det_rows[:m]
    A = np.zeros((L, m))
    A[anchor_rows] = np.eye(m)
    for i in det_rows[m:]:
        A[i] = _capped_simplex_row(adv, m, p.gamma)

    rand_rows = np.setdiff1d(np.arange(L), det_rows)
    c0 = (1.0 / m + p.gamma) / 2.0
    half_width = (p.gamma - 1.0 / m) / 2.0
    if radius >= half_width:
        raise ParameterError(
            f"support infeasible: truncation radius {radius:.3g} exceeds the "
            f"half-width {half_width:.3g} of [1/m, gamma]"
        )
    p_cap = min(p.noise_perturbation_norm, half_width - radius) * 0.999
    P = adv.uniform(-p_cap, p_cap, size=(rand_rows.size, m))
    row_norms = np.linalg.norm(P, axis=1, keepdims=True)
    over = row_norms[:, 0] > p.noise_perturbation_norm
    if over.any():
        P[over] *= p.noise_perturbation_norm / row_norms[over]
    A_noise = _truncated_gaussian(rng, (rand_rows.size, m), np.sqrt(p.q), radius)
    tilde = c0 + P + A_noise
    if tilde.min() < 1.0 / m - 1e-12 or tilde.max() > p.gamma + 1e-12:
        raise NumericError("generated A escaped [1/m, gamma]; parameter check is broken")
    A[rand_rows] = tilde / tilde.sum(axis=1, keepdims=True)

    inst = BanditInstance(U=A @ W, A=A, W=W, reward_model=RewardModel("bernoulli"))
    return inst.validate()


def generate_lower_bound(L, K, m, seed):
    """Block-structured instance: m disjoint context classes of size L/m,
    uniform beta, distinct per-class optimal arms."""
    if m < 1 or m > min(L, K):
        raise DimensionError("need 1 <= m <= min(L, K)")
    if L % m != 0:
        raise ParameterError(f"m={m} must divide L={L}")
    rng = np.random.default_rng(seed)
    W = rng.uniform(0.05, 0.8, size=(m, K))
    for i in range(m):
        W[i, i] = 0.9  # distinct optimal arm per latent class
    A = np.zeros((L, m))
    size = L // m
    for i in range(m):
        A[i * size : (i + 1) * size, i] = 1.0
    inst = BanditInstance(U=A @ W, A=A, W=W, reward_model=RewardModel("bernoulli"))
    return inst.validate()


def _kl_bernoulli(p, q):
    """KL(Ber(p) || Ber(q)) with the 0 log 0 = 0 convention."""
    if q <= 0.0 or q >= 1.0:
        raise ParameterError("KL reference point must lie strictly inside (0, 1)")
    val = 0.0
    if p > 0:
        val += p * np.log(p / q)
    if p < 1:
        val += (1 - p) * np.log((1 - p) / (1 - q))
    return float(val)


def lower_bound_value(inst: BanditInstance, T, alpha):
    """Evaluate the regret lower bound's right-hand side (constant C = 1).

    The instance must come from :func:`generate_lower_bound` (one-hot mixing
    rows, Bernoulli rewards). The scale factor is the worst ratio of class gap
    to KL divergence toward the midpoint (U_max + 1)/2; arms sitting exactly
    at the midpoint are excluded (their KL is zero). The result is exact up to
    the bound's unspecified universal constant.
    """
    if inst.reward_model.kind != "bernoulli":
        raise ParameterError("lower bound is defined for Bernoulli instances only")
    if T <= 0:
        raise ParameterError("T must be positive")
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    if inst.A is None:
        raise ParameterError("instance must carry its factors")
    A = inst.A
    one_hot = (np.abs(A.max(axis=1) - 1.0) < 1e-12) & (
        np.abs(A.sum(axis=1) - 1.0) < 1e-12
    )
    if not one_hot.all():
        raise ParameterError("instance rows must be one-hot (lower-bound family)")
    L, K = inst.L, inst.K
    m = A.shape[1]
    lam = (inst.U.max() + 1.0) / 2.0
    if lam >= 1.0:
        raise ParameterError("U_max = 1 puts the KL reference point at 1")

    d_of_u = np.inf
    for i in range(m):
        row = inst.W[i]
        k_star = int(np.argmax(row))
        delta_i = row[k_star] - np.partition(row, K - 2)[-2]
        for k in range(K):
            if k == k_star:
                continue
            kl = _kl_bernoulli(row[k], lam)
            if kl < 1e-15:
                continue
            d_of_u = min(d_of_u, (K - 1) * delta_i / kl)
    if not np.isfinite(d_of_u):
        raise NumericError("no arm with positive KL toward the midpoint")
    bracket = (1 - alpha) * (np.log(T / (2 * m)) - np.log(L / m)) - np.log(4.0 * K)
    return float((K - 1) * m * d_of_u * bracket)


def wstrip_l1_values(W, m_prime, trials, seed):
    """psi^1_m over `trials` random column subsets of size 2*m_prime."""
    W = as_matrix(W, "W")
    m, K = W.shape
    if 2 * m_prime > K:
        raise DimensionError(f"subset size {2 * m_prime} exceeds {K} columns")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    return np.array(
        [
            psi1_m(W[:, np.sort(rng.choice(K, size=2 * m_prime, replace=False))])
            for _ in range(trials)
        ]
    )


def wstrip_l2_values(A, m_prime, trials, seed):
    """sigma_m over `trials` random row subsets of size 2*m_prime."""
    A = as_matrix(A, "A")
    L, m = A.shape
    if 2 * m_prime > L:
        raise DimensionError(f"subset size {2 * m_prime} exceeds {L} rows")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    return np.array(
        [
            singular_values(A[np.sort(rng.choice(L, size=2 * m_prime, replace=False))])[
                m - 1
            ]
            for _ in range(trials)
        ]
    )


def _default_l1_threshold(m, m_prime):
    return (13.0 / 60.0) * np.sqrt(15.0 * m_prime) / np.sqrt(8.0 * m)


def _default_l2_threshold(m, m_prime):
    return (1.0 / 20.0) * np.sqrt(m_prime) / m


def check_wstrip_l1(W, m_prime, trials, seed, threshold=None):
    """(5th-percentile psi^1_m, fraction of subsets below the threshold)."""
    values = wstrip_l1_values(W, m_prime, trials, seed)
    thr = _default_l1_threshold(W.shape[0], m_prime) if threshold is None else threshold
    return float(np.percentile(values, 5)), float(np.mean(values < thr))


def check_wstrip_l2(A, m_prime, trials, seed, threshold=None):
    """(5th-percentile sigma_m, fraction of subsets below the threshold)."""
    values = wstrip_l2_values(A, m_prime, trials, seed)
    thr = _default_l2_threshold(A.shape[1], m_prime) if threshold is None else threshold
    return float(np.percentile(values, 5)), float(np.mean(values < thr))
