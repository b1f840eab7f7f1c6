"""Linear programming front end used by the anchor-detection and factor fits.

The public contract is a dense problem statement (objective, rows of
(coefficients, relation, rhs), per-variable bounds) and a solution with an
explicit status. Solving is delegated to HiGHS via ``scipy.optimize.linprog``;
rows are rescaled by their max-abs coefficient before the solve and every
returned point is re-verified against the original, unscaled constraints.

Constraint rows may be supplied as a list of tuples (the canonical form) or,
for the large self-representation programs, prebuilt as one sparse matrix via
:meth:`LinearProgram.from_matrix`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import DimensionError, NumericError, ParameterError

__all__ = ["LinearProgram", "LpSolution", "solve", "FEAS_TOL", "OPT_TOL"]

FEAS_TOL = 1e-7
OPT_TOL = 1e-7

_RELATIONS = {"<=", "=", ">="}


@dataclass
class LinearProgram:
    """min c^T x subject to row-wise <=/=/>= constraints and variable bounds.

    ``constraints`` is a list of ``(coeffs, relation, rhs)`` tuples. ``bounds``
    is a per-variable list of ``(lo, hi)`` with ``None`` for unbounded; the
    default is x >= 0.
    """

    objective: np.ndarray
    constraints: list = field(default_factory=list)
    bounds: list | None = None

    # sparse alternative to `constraints`, set via from_matrix
    coeff_matrix: sp.spmatrix | None = None
    relations: list | None = None
    rhs: np.ndarray | None = None

    @classmethod
    def from_matrix(cls, objective, coeff_matrix, relations, rhs, bounds=None):
        """Build a program whose constraint rows live in one sparse matrix."""
        lp = cls(objective=np.asarray(objective, dtype=float), bounds=bounds)
        lp.coeff_matrix = sp.csr_matrix(coeff_matrix)
        lp.relations = list(relations)
        lp.rhs = np.asarray(rhs, dtype=float)
        return lp

    def n_vars(self):
        return int(np.asarray(self.objective).shape[0])

    def _rows(self):
        """Return (csr matrix, relations, rhs) in a single normalized form."""
        n = self.n_vars()
        if self.coeff_matrix is not None:
            A = self.coeff_matrix
            if A.shape[1] != n:
                raise DimensionError(
                    f"constraint matrix has {A.shape[1]} columns for {n} variables"
                )
            if A.shape[0] != len(self.relations) or A.shape[0] != self.rhs.shape[0]:
                raise DimensionError("relations/rhs length mismatch with matrix rows")
            rel, rhs = self.relations, self.rhs
        else:
            coeffs = []
            rel = []
            rhs_list = []
            for row in self.constraints:
                vec, relation, b = row
                vec = np.asarray(vec, dtype=float)
                if vec.shape != (n,):
                    raise DimensionError(
                        f"constraint vector of length {vec.shape} for {n} variables"
                    )
                coeffs.append(vec)
                rel.append(relation)
                rhs_list.append(float(b))
            A = sp.csr_matrix(np.asarray(coeffs)) if coeffs else sp.csr_matrix((0, n))
            rhs = np.asarray(rhs_list, dtype=float)
        for relation in rel:
            if relation not in _RELATIONS:
                raise ParameterError(f"unknown relation {relation!r}")
        if not np.all(np.isfinite(rhs)):
            raise ParameterError("constraint rhs must be finite")
        return A, rel, rhs


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None
    objective_value: float | None


def _scale_rows(A, rhs):
    """Divide each row (and its rhs) by its max-abs coefficient."""
    scale = np.abs(A).max(axis=1)
    scale = np.asarray(scale.todense()).ravel() if sp.issparse(scale) else scale
    scale = np.where(scale > 0, scale, 1.0)
    D = sp.diags(1.0 / scale)
    return D @ A, rhs / scale, scale


def solve(lp: LinearProgram) -> LpSolution:
    """Solve the program; deterministic for identical input.

    status == "optimal" guarantees the returned point satisfies every original
    constraint within FEAS_TOL (absolute, after row scaling).
    """
    n = lp.n_vars()
    c = np.asarray(lp.objective, dtype=float)
    if not np.all(np.isfinite(c)):
        raise ParameterError("objective must be finite")
    A, rel, rhs = lp._rows()

    rel_arr = np.asarray(rel)
    ub_mask = rel_arr == "<="
    ge_mask = rel_arr == ">="
    eq_mask = rel_arr == "="

    A_ub_parts, b_ub_parts = [], []
    if ub_mask.any():
        A_ub_parts.append(A[np.where(ub_mask)[0]])
        b_ub_parts.append(rhs[ub_mask])
    if ge_mask.any():
        A_ub_parts.append(-A[np.where(ge_mask)[0]])
        b_ub_parts.append(-rhs[ge_mask])
    A_ub = b_ub = None
    if A_ub_parts:
        A_ub = sp.vstack(A_ub_parts, format="csr")
        b_ub = np.concatenate(b_ub_parts)
        A_ub, b_ub, _ = _scale_rows(A_ub, b_ub)
    A_eq = b_eq = None
    if eq_mask.any():
        A_eq = A[np.where(eq_mask)[0]]
        b_eq = rhs[eq_mask]
        A_eq, b_eq, _ = _scale_rows(A_eq, b_eq)

    bounds = lp.bounds if lp.bounds is not None else [(0.0, None)] * n
    if len(bounds) != n:
        raise DimensionError(f"{len(bounds)} bounds for {n} variables")

    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
        options={
            "primal_feasibility_tolerance": 1e-9,
            "dual_feasibility_tolerance": 1e-9,
        },
    )
    if res.status == 2:
        return LpSolution(status="infeasible", x=None, objective_value=None)
    if res.status == 3:
        return LpSolution(status="unbounded", x=None, objective_value=None)
    if res.status != 0:
        raise NumericError(f"LP solver failed: {res.message}")

    x = np.asarray(res.x, dtype=float)
    _verify_feasible(A, rel, rhs, bounds, x)
    return LpSolution(status="optimal", x=x, objective_value=float(c @ x))


def _verify_feasible(A, rel, rhs, bounds, x):
    """Re-check the point against the original rows (scaled residuals)."""
    if A.shape[0]:
        ax = A @ x
        scale = np.abs(A).max(axis=1)
        scale = np.asarray(scale.todense()).ravel() if sp.issparse(scale) else scale
        scale = np.where(scale > 0, scale, 1.0)
        resid = (ax - rhs) / scale
        for i, relation in enumerate(rel):
            bad = (
                (relation == "<=" and resid[i] > FEAS_TOL)
                or (relation == ">=" and resid[i] < -FEAS_TOL)
                or (relation == "=" and abs(resid[i]) > FEAS_TOL)
            )
            if bad:
                raise NumericError(
                    f"solver returned infeasible point: row {i} ({relation}) "
                    f"scaled residual {resid[i]:.3e}"
                )
    for j, (lo, hi) in enumerate(bounds):
        if lo is not None and x[j] < lo - FEAS_TOL:
            raise NumericError(f"solver violated lower bound on x[{j}]")
        if hi is not None and x[j] > hi + FEAS_TOL:
            raise NumericError(f"solver violated upper bound on x[{j}]")
