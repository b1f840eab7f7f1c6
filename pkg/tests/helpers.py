"""Shared builders for controlled test instances and brute-force oracles."""

import itertools

import numpy as np

from nmfbandit.linalg import psi1_m


def separable_mixing(L, m, gamma, rng):
    """Row-stochastic A: rows 0..m-1 are the unit vectors, the rest random
    simplex rows with every entry capped at gamma (m >= 2; for m = 1 the only
    row is the unit scalar)."""
    if m == 1:
        return np.ones((L, 1))
    A = np.zeros((L, m))
    A[:m] = np.eye(m)
    for i in range(m, L):
        v = rng.dirichlet(np.ones(m))
        top = v.max()
        if top > gamma:
            lam = (gamma - 1.0 / m) / (top - 1.0 / m)
            v = lam * v + (1 - lam) / m
        A[i] = v
    return A


def noisy_separable_instance(L, m, n_cols, gamma, seed, eps_scale=0.9):
    """Separable X = A W + N with per-row l1 noise at eps = eps_scale times
    the recovery threshold psi1(W) * (1 - gamma) / 15.

    Returns (X_tilde, A, W, eps)."""
    rng = np.random.default_rng(seed)
    A = separable_mixing(L, m, gamma, rng)
    W = rng.random((m, n_cols))
    rho1 = psi1_m(W)
    eps = eps_scale * rho1 * (1.0 - gamma) / 15.0
    N = rng.normal(size=(L, n_cols))
    N *= (eps * rng.uniform(0.5, 1.0, size=(L, 1))) / np.abs(N).sum(axis=1, keepdims=True)
    return A @ W + N, A, W, eps


def vertex_enumeration_optimum(c, rows, lo, hi):
    """Brute-force LP optimum: intersect every n-subset of tight constraints
    (constraint rows as equalities plus bound faces), keep feasible points,
    take the best objective. All variables are box-bounded so the optimum is
    attained at such a vertex. Returns None when no feasible vertex exists."""
    n = len(c)
    planes = [(np.asarray(vec, dtype=float), float(rhs)) for vec, _, rhs in rows]
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        planes.append((e, lo))
        planes.append((e.copy(), hi))
    best = None
    for combo in itertools.combinations(range(len(planes)), n):
        A = np.array([planes[i][0] for i in combo])
        b = np.array([planes[i][1] for i in combo])
        try:
            x = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            continue
        ok = True
        for vec, rel, rhs in rows:
            val = vec @ x
            if rel == "<=" and val > rhs + 1e-9:
                ok = False
            elif rel == ">=" and val < rhs - 1e-9:
                ok = False
            elif rel == "=" and abs(val - rhs) > 1e-9:
                ok = False
            if not ok:
                break
        if ok and np.all(x >= lo - 1e-9) and np.all(x <= hi + 1e-9):
            value = float(c @ x)
            if best is None or value < best:
                best = value
    return best


def random_box_lp(rng, n_lo=3, n_hi=5, lo=0.0, hi=10.0):
    """Random box-bounded LP (objective, rows, bounds) seeded feasible-ish."""
    n = int(rng.integers(n_lo, n_hi + 1))
    n_rows = int(rng.integers(3, 7))
    c = rng.normal(size=n)
    x0 = rng.uniform(0, 5, size=n)
    rows = []
    for _ in range(n_rows):
        vec = rng.normal(size=n)
        rel = rng.choice(["<=", ">=", "="], p=[0.5, 0.4, 0.1])
        slack = rng.uniform(0.0, 2.0)
        base = float(vec @ x0)
        rhs = base + slack if rel == "<=" else base - slack if rel == ">=" else base
        rows.append((vec, rel, rhs))
    return c, rows, lo, hi
