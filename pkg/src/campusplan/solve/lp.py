"""LP relaxation entry point over :class:`~campusplan.model.MilpModel`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..model import MilpModel
from .simplex import simplex

LP_METHODS = ("highs", "simplex")


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None
    objective: float
    duals: np.ndarray | None = None
    basis: np.ndarray | None = None


def _highs(c, A, sense, rhs, lb, ub, presolve=True):
    le, ge, eq = sense == "L", sense == "G", sense == "E"
    A_ub = sp.vstack([A[le], -A[ge]]).tocsr() if (le.any() or ge.any()) else None
    b_ub = np.concatenate([rhs[le], -rhs[ge]]) if A_ub is not None else None
    A_eq = A[eq] if eq.any() else None
    b_eq = rhs[eq] if eq.any() else None
    bounds = np.column_stack([lb, ub])
    return linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
        options={"presolve": presolve},
    )


def solve_lp(model: MilpModel, lb=None, ub=None, method: str = "highs") -> LPResult:
    """Solve the continuous relaxation of ``model``.

    Parameters
    ----------
    model : MilpModel
    lb, ub : array_like, optional
        Bound overrides, e.g. from a branch-and-bound node.
    method : {"highs", "simplex"}
        ``"simplex"`` runs the bundled dense revised simplex and also returns
        the final basis; ``"highs"`` delegates to SciPy's HiGHS interface.
    """
    lb = model.lb if lb is None else np.asarray(lb, dtype=float)
    ub = model.ub if ub is None else np.asarray(ub, dtype=float)
    if model.n_cols == 0:
        if model.n_rows and not _empty_rows_ok(model):
            return LPResult("infeasible", None, np.nan)
        return LPResult("optimal", np.zeros(0), 0.0, np.zeros(model.n_rows))
    if np.any(lb > ub):
        return LPResult("infeasible", None, np.nan)
    if method == "simplex":
        r = simplex(model.c, model.A, model.sense, model.rhs, lb, ub)
        if r.status == "iteration_limit":
            raise RuntimeError("simplex iteration limit reached")
        return LPResult(r.status, r.x, r.objective, r.duals, r.basis)
    if method != "highs":
        raise ValueError(f"unknown LP method {method!r}; expected one of {LP_METHODS}")

    res = _highs(model.c, model.A, model.sense, model.rhs, lb, ub)
    if res.status in (2, 3, 4):
        # presolve can confuse infeasible and unbounded, and occasionally
        # leaves a badly scaled reduced model; confirm without it
        res = _highs(model.c, model.A, model.sense, model.rhs, lb, ub, presolve=False)
    if res.status == 0:
        x = np.clip(res.x, lb, ub)
        duals = np.zeros(model.n_rows)
        le, ge, eq = model.sense == "L", model.sense == "G", model.sense == "E"
        n_le = int(le.sum())
        if res.ineqlin is not None and len(res.ineqlin.marginals):
            duals[le] = res.ineqlin.marginals[:n_le]
            duals[ge] = -res.ineqlin.marginals[n_le:]
        if eq.any():
            duals[eq] = res.eqlin.marginals
        return LPResult("optimal", x, float(model.c @ x), duals)
    if res.status == 2:
        return LPResult("infeasible", None, np.nan)
    if res.status == 3:
        return LPResult("unbounded", None, -np.inf)
    if res.status == 4:
        return LPResult("numerical", None, np.nan)
    raise RuntimeError(f"LP solver failed: {res.message}")


def _empty_rows_ok(model: MilpModel) -> bool:
    rhs, sense = model.rhs, model.sense
    return bool(
        np.all(rhs[sense == "L"] >= 0) and np.all(rhs[sense == "G"] <= 0) and np.all(rhs[sense == "E"] == 0)
    )


def infeasible_rows(model: MilpModel, tol: float = 1e-7) -> list[str] | None:
    """Rows an elastic relaxation has to violate, or ``None`` if the LP is feasible.

    Every row gets nonnegative elastic columns in the direction(s) its sense
    allows to be violated; their total, each scaled by ``max(1, |rhs|)``, is
    minimised subject to the original bounds. Rows left with a positive
    elastic value form the reported certificate set. An empty list means the
    bounds alone are inconsistent.
    """
    if np.any(model.lb > model.ub):
        return []
    m = model.n_rows
    sense = np.asarray(model.sense)
    scale = np.maximum(1.0, np.abs(model.rhs))
    up = np.flatnonzero(sense != "L")  # may need extra activity
    down = np.flatnonzero(sense != "G")  # may need less activity
    E = sp.hstack(
        [
            sp.csr_matrix((np.ones(up.size), (up, np.arange(up.size))), shape=(m, up.size)),
            sp.csr_matrix((-np.ones(down.size), (down, np.arange(down.size))), shape=(m, down.size)),
        ],
        format="csr",
    )
    k = up.size + down.size
    elastic = MilpModel(
        A=sp.hstack([model.A, E], format="csr"),
        sense=sense,
        rhs=model.rhs,
        c=np.concatenate([np.zeros(model.n_cols), 1.0 / scale[up], 1.0 / scale[down]]),
        lb=np.concatenate([model.lb, np.zeros(k)]),
        ub=np.concatenate([model.ub, np.full(k, np.inf)]),
        integer=np.zeros(model.n_cols + k, dtype=bool),
        row_names=list(model.row_names),
        col_names=list(model.col_names) + [f"elastic{i}" for i in range(k)],
    )
    res = solve_lp(elastic)
    if res.status != "optimal":
        return []
    if res.objective <= tol:
        return None
    e = res.x[model.n_cols:]
    rows = np.concatenate([up, down])
    hit = sorted(set(rows[e > tol * scale[rows]].tolist()))
    return [model.row_names[i] for i in hit]
