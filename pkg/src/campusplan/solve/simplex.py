"""Dense two-phase revised simplex for small bounded LPs.

Problem form::

    min  c'x   s.t.  A x (<=, >=, =) b,   lb <= x <= ub

Each row receives a slack so the working system is ``[A I] y = b`` with
slack bounds encoding the row sense. Nonbasic columns sit at a finite bound
(free columns sit at zero). Phase one adds one artificial per row and
minimizes their sum; artificials are then fixed at zero and may linger in
the basis as degenerate entries. The basis inverse is kept explicitly and
refactored periodically.

Pricing is Dantzig's rule. After a run of degenerate pivots the method
switches to Bland's smallest-index rule until progress resumes, which rules
out cycling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class SimplexResult:
    status: str
    x: np.ndarray | None
    objective: float
    duals: np.ndarray | None
    basis: np.ndarray | None
    iterations: int


class _Tableau:
    def __init__(self, M, cost, lo, hi, b, basis, xval, tol, refactor):
        self.M = M
        self.cost = cost
        self.lo = lo
        self.hi = hi
        self.b = b
        self.basis = basis
        self.x = xval
        self.tol = tol
        self.refactor_every = refactor
        self.m = M.shape[0]
        self.is_basic = np.zeros(M.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.since_refactor = 0
        self.factor()

    def factor(self):
        B = self.M[:, self.basis]
        self.Binv = np.linalg.inv(B)
        # recompute basic values from nonbasic ones for numerical hygiene
        nb = ~self.is_basic
        rhs = self.b - self.M[:, nb] @ self.x[nb]
        self.x[self.basis] = self.Binv @ rhs
        self.since_refactor = 0

    def run(self, max_iter: int, bland_after: int = 25) -> tuple[str, int]:
        tol = self.tol
        degenerate_run = 0
        it = 0
        while it < max_iter:
            it += 1
            y = self.cost[self.basis] @ self.Binv
            d = self.cost - y @ self.M
            d[self.is_basic] = 0.0
            at_lo = np.isclose(self.x, self.lo, rtol=0, atol=tol) & np.isfinite(self.lo)
            at_hi = np.isclose(self.x, self.hi, rtol=0, atol=tol) & np.isfinite(self.hi)
            fixed = at_lo & at_hi
            can_up = ~self.is_basic & ~fixed & ~at_hi
            can_down = ~self.is_basic & ~fixed & ~at_lo
            score = np.zeros_like(d)
            up = can_up & (d < -tol)
            down = can_down & (d > tol)
            score[up] = -d[up]
            score[down] = d[down]
            candidates = np.flatnonzero(score > 0)
            if candidates.size == 0:
                return OPTIMAL, it
            if degenerate_run >= bland_after:
                j = int(candidates[0])
            else:
                j = int(candidates[np.argmax(score[candidates])])
            direction = 1.0 if up[j] else -1.0

            w = self.Binv @ self.M[:, j]
            alpha = direction * w
            xb = self.x[self.basis]
            steps = np.full(self.m, np.inf)
            dec = (alpha > tol) & np.isfinite(self.lo[self.basis])
            inc = (alpha < -tol) & np.isfinite(self.hi[self.basis])
            steps[dec] = np.maximum(xb[dec] - self.lo[self.basis][dec], 0.0) / alpha[dec]
            steps[inc] = np.maximum(self.hi[self.basis][inc] - xb[inc], 0.0) / -alpha[inc]
            flip = self.hi[j] - self.lo[j]
            best = steps.min()
            leave = -1
            if best < flip - tol or (np.isfinite(best) and not np.isfinite(flip)):
                ties = np.flatnonzero(steps <= best + tol)
                if degenerate_run >= bland_after:
                    leave = int(ties[np.argmin(self.basis[ties])])
                else:
                    leave = int(ties[np.argmax(np.abs(alpha[ties]))])
                theta = steps[leave]
                leave_to_hi = bool(inc[leave])
            else:
                theta = flip
            if not np.isfinite(theta):
                return UNBOUNDED, it

            degenerate_run = degenerate_run + 1 if theta <= tol else 0
            self.x[j] += direction * theta
            self.x[self.basis] -= theta * alpha
            if leave < 0:
                # bound flip of the entering column
                self.x[j] = self.hi[j] if direction > 0 else self.lo[j]
                continue
            out = self.basis[leave]
            self.x[out] = self.hi[out] if leave_to_hi else self.lo[out]
            self.is_basic[out] = False
            self.is_basic[j] = True
            self.basis[leave] = j
            piv = w[leave]
            row = self.Binv[leave] / piv
            self.Binv -= np.outer(w, row)
            self.Binv[leave] = row
            self.since_refactor += 1
            if self.since_refactor >= self.refactor_every:
                self.factor()
        return ITERATION_LIMIT, it


def simplex(
    c,
    A,
    sense,
    b,
    lb,
    ub,
    tol: float = 1e-9,
    max_iter: int = 50_000,
    refactor: int = 50,
) -> SimplexResult:
    """Solve a bounded LP with the two-phase revised simplex method.

    Parameters
    ----------
    c : array_like, shape (n,)
    A : array_like or sparse, shape (m, n)
    sense : sequence of {'L', 'G', 'E'}
    b : array_like, shape (m,)
    lb, ub : array_like, shape (n,)
        Bounds; infinities allowed.

    Returns
    -------
    SimplexResult
        ``duals`` are row prices ``y`` with ``c - A'y`` the reduced costs
        on structural columns; ``basis`` lists basic column indices in the
        slack-augmented system (``j >= n`` are row slacks).
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float).reshape(-1, n)
    m = A.shape[0]
    b = np.asarray(b, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if np.any(lb > ub + tol):
        return SimplexResult(INFEASIBLE, None, np.nan, None, None, 0)
    if m == 0:
        x = np.where(c > 0, lb, np.where(c < 0, ub, np.clip(0.0, lb, ub)))
        if not np.all(np.isfinite(x)):
            return SimplexResult(UNBOUNDED, None, -np.inf, None, None, 0)
        return SimplexResult(OPTIMAL, x, float(c @ x), np.zeros(0), np.zeros(0, dtype=int), 0)

    sense = np.asarray(sense)
    s_lo = np.where(sense == "G", -np.inf, 0.0)
    s_hi = np.where(sense == "L", np.inf, 0.0)
    M = np.hstack([A, np.eye(m)])
    lo = np.concatenate([lb, s_lo])
    hi = np.concatenate([ub, s_hi])
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))

    resid = b - M @ x
    sign = np.where(resid >= 0, 1.0, -1.0)
    M1 = np.hstack([M, np.diag(sign)])
    lo1 = np.concatenate([lo, np.zeros(m)])
    hi1 = np.concatenate([hi, np.full(m, np.inf)])
    x1 = np.concatenate([x, np.abs(resid)])
    cost1 = np.concatenate([np.zeros(n + m), np.ones(m)])
    basis = np.arange(n + m, n + 2 * m)
    tab = _Tableau(M1, cost1, lo1, hi1, b, basis, x1, tol, refactor)
    status, it1 = tab.run(max_iter)
    if status != OPTIMAL:
        return SimplexResult(status, None, np.nan, None, None, it1)
    infeas = float(tab.x[n + m :].sum())
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if infeas > 1e-7 * scale:
        return SimplexResult(INFEASIBLE, None, np.nan, None, None, it1)

    tab.hi[n + m :] = 0.0
    tab.x[n + m :] = np.clip(tab.x[n + m :], 0.0, 0.0)
    tab.cost = np.concatenate([c, np.zeros(2 * m)])
    tab.factor()
    status, it2 = tab.run(max_iter)
    iters = it1 + it2
    if status != OPTIMAL:
        return SimplexResult(status, None, -np.inf if status == UNBOUNDED else np.nan, None, None, iters)
    xs = np.clip(tab.x[:n], lb, ub)
    y = tab.cost[tab.basis] @ tab.Binv
    return SimplexResult(OPTIMAL, xs, float(c @ xs), y, tab.basis.copy(), iters)
