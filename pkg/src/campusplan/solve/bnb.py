"""LP-based branch and bound with best-bound node selection."""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from ..model import MilpModel
from .lp import solve_lp
from .solution import Solution, optimality_gap

log = logging.getLogger(__name__)

INT_TOL = 1e-6
SIZE_WARNING_NNZ = 50_000


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lb: np.ndarray
    ub: np.ndarray
    depth: int


def _fractional(x: np.ndarray, int_idx: np.ndarray) -> np.ndarray:
    vals = x[int_idx]
    return np.abs(vals - np.round(vals))


class BranchAndBound:
    """Branch and bound over the integer columns of a :class:`MilpModel`.

    Node selection is best bound, ties broken by creation order. Branching
    takes the most fractional integer column, ties broken by lowest index.
    An incumbent is sought before branching by rounding the root relaxation
    (nearest, up, down) and re-solving the continuous part, then by diving
    from the root; both heuristics rerun every ``heuristic_every`` nodes.
    """

    def __init__(
        self,
        model: MilpModel,
        gap_tol: float = 1.0,
        time_limit: float = math.inf,
        node_limit: int | None = None,
        lp_method: str = "highs",
        heuristic_every: int = 50,
        dive_tol: float = 0.1,
        rins_nodes: int = 150,
        lb: np.ndarray | None = None,
        ub: np.ndarray | None = None,
        start: np.ndarray | None = None,
    ):
        if gap_tol < 0:
            raise ValueError("gap tolerance must be nonnegative")
        self.model = model
        self.gap_tol = gap_tol
        self.time_limit = time_limit
        self.node_limit = node_limit
        self.lp_method = lp_method
        self.heuristic_every = heuristic_every
        self.dive_tol = dive_tol
        self.rins_nodes = rins_nodes
        self.lb = model.lb if lb is None else np.asarray(lb, dtype=float)
        self.ub = model.ub if ub is None else np.asarray(ub, dtype=float)
        self.start = None if start is None else np.asarray(start, dtype=float)
        self.int_idx = np.flatnonzero(model.integer)
        self.incumbent: np.ndarray | None = None
        self.upper = math.inf
        self.nodes = 0

    # -- helpers ---------------------------------------------------------
    def _lp(self, lb, ub):
        return solve_lp(self.model, lb, ub, self.lp_method)

    def _prunable(self, bound: float) -> bool:
        if not math.isfinite(self.upper):
            return False
        if bound >= self.upper - 1e-9 * max(1.0, abs(self.upper)):
            return True
        return optimality_gap(bound, self.upper) <= self.gap_tol

    def _offer(self, x: np.ndarray, obj: float) -> bool:
        if obj < self.upper - 1e-12 * max(1.0, abs(obj)):
            self.upper = obj
            self.incumbent = x
            log.debug("incumbent %.10g after %d nodes", obj, self.nodes)
            return True
        return False

    def _fix_and_solve(self, values: np.ndarray, lb: np.ndarray, ub: np.ndarray):
        """Fix integer columns to ``values`` and solve for the continuous rest."""
        lo, hi = lb.copy(), ub.copy()
        vals = np.clip(values, lb[self.int_idx], ub[self.int_idx])
        lo[self.int_idx] = vals
        hi[self.int_idx] = vals
        res = self._lp(lo, hi)
        if res.status != "optimal":
            return None
        x = res.x.copy()
        x[self.int_idx] = vals
        return x, float(self.model.c @ x)

    def _rounding(self, x: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> None:
        raw = x[self.int_idx]
        for vals in (np.round(raw), np.ceil(raw - INT_TOL), np.floor(raw + INT_TOL)):
            found = self._fix_and_solve(vals, lb, ub)
            if found is not None:
                self._offer(*found)

    def _dive(self, x: np.ndarray, lb: np.ndarray, ub: np.ndarray, max_lps: int = 60) -> None:
        """Fractional diving from an LP point.

        Each round fixes every integer column already within ``dive_tol`` of an
        integer, plus the least fractional remaining one (rounded to nearest,
        the opposite direction tried once on infeasibility), then re-solves.
        """
        lo, hi = lb.copy(), ub.copy()
        idx = self.int_idx
        for _ in range(max_lps):
            vals = x[idx]
            frac = np.abs(vals - np.round(vals))
            near = frac <= self.dive_tol
            lo[idx[near]] = hi[idx[near]] = np.round(vals[near])
            open_ = np.flatnonzero(~near)
            if open_.size == 0:
                found = self._fix_and_solve(np.round(vals), lo, hi)
                if found is not None:
                    self._offer(*found)
                return
            k = open_[np.argmin(frac[open_])]
            j = idx[k]
            first = float(np.round(vals[k]))
            second = math.floor(vals[k]) if first > vals[k] else math.ceil(vals[k])
            for v in (first, second):
                lo2, hi2 = lo.copy(), hi.copy()
                lo2[j] = hi2[j] = v
                res = self._lp(lo2, hi2)
                if res.status == "optimal":
                    break
            else:
                return
            if self._prunable(res.objective):
                return
            lo, hi, x = lo2, hi2, res.x

    def _polish(self, lb: np.ndarray, ub: np.ndarray, max_lps: int = 200) -> None:
        """One-opt descent: lower single integer columns of the incumbent by one."""
        if self.incumbent is None:
            return
        idx = self.int_idx
        lps = 0
        improved = True
        while improved and lps < max_lps:
            improved = False
            vals = np.round(self.incumbent[idx])
            for k in np.flatnonzero(vals > lb[idx]):
                trial = vals.copy()
                trial[k] -= 1
                found = self._fix_and_solve(trial, lb, ub)
                lps += 1
                if found is not None and self._offer(*found):
                    vals = np.round(self.incumbent[idx])
                    improved = True
                if lps >= max_lps:
                    break

    def _rins(self, x: np.ndarray, lb: np.ndarray, ub: np.ndarray, time_left: float = math.inf) -> None:
        """Relaxation-induced neighbourhood search around the incumbent.

        Integer columns on which the LP point ``x`` and the incumbent agree are
        fixed; the rest is searched by a node-limited branch and bound that
        runs only the rounding and diving heuristics.
        """
        if self.incumbent is None or not self.rins_nodes or time_left <= 0:
            return
        idx = self.int_idx
        inc = self.incumbent[idx]
        agree = np.abs(x[idx] - inc) <= INT_TOL
        if agree.all():
            return
        lo, hi = lb.copy(), ub.copy()
        lo[idx[agree]] = hi[idx[agree]] = np.round(inc[agree])
        sub = BranchAndBound(
            self.model,
            0.0,
            time_left,
            node_limit=self.rins_nodes,
            lp_method=self.lp_method,
            heuristic_every=self.heuristic_every,
            dive_tol=self.dive_tol,
            rins_nodes=0,
            lb=lo,
            ub=hi,
        )
        sub.upper = self.upper
        sub.incumbent = self.incumbent
        sub.solve()
        if sub.incumbent is not None:
            self._offer(sub.incumbent, sub.upper)

    # -- main loop ---------------------------------------------------------
    def solve(self) -> Solution:
        start = time.perf_counter()
        model = self.model
        names = list(model.col_names)

        def finish(status: str, bound: float) -> Solution:
            obj = self.upper if self.incumbent is not None else math.nan
            if self.incumbent is not None and status in ("optimal", "gap_reached"):
                bound = min(bound, self.upper)
            return Solution(
                self.incumbent,
                obj,
                bound,
                status,
                time.perf_counter() - start,
                self.nodes,
                names,
            )

        root = self._lp(self.lb, self.ub)
        self.nodes = 1
        if root.status == "infeasible":
            return finish("infeasible", math.nan)
        if root.status == "unbounded":
            return finish("unbounded", -math.inf)
        if root.status != "optimal":
            raise RuntimeError(f"root relaxation failed ({root.status})")
        if self.start is not None:
            # a supplied start only contributes its integer part
            found = self._fix_and_solve(np.round(self.start[self.int_idx]), self.lb, self.ub)
            if found is not None:
                self._offer(*found)

        if self.int_idx.size == 0 or np.all(_fractional(root.x, self.int_idx) <= INT_TOL):
            x = root.x.copy()
            if self.int_idx.size:
                found = self._fix_and_solve(np.round(x[self.int_idx]), self.lb, self.ub)
                x, obj = found if found is not None else (x, root.objective)
            else:
                obj = root.objective
            self._offer(x, obj)
            return finish("optimal", root.objective)

        self._rounding(root.x, self.lb, self.ub)
        self._dive(root.x, self.lb, self.ub)
        self._polish(self.lb, self.ub)
        if not self._prunable(root.objective):
            self._rins(root.x, self.lb, self.ub, self.time_limit - (time.perf_counter() - start))
        seq = 0
        heap: list[_Node] = []
        # bound of nodes discarded only because they cannot improve by more than the gap
        gap_pruned = math.inf
        self._branch(heap, root.x, root.objective, self.lb, self.ub, 0, seq)
        seq += 2

        while heap:
            if self._prunable(heap[0].bound):
                # best-bound order: every remaining node is prunable too
                gap_pruned = min(gap_pruned, heap[0].bound)
                break
            if time.perf_counter() - start > self.time_limit:
                return finish("time_limit", min(heap[0].bound, gap_pruned))
            if self.node_limit is not None and self.nodes >= self.node_limit:
                return finish("time_limit", min(heap[0].bound, gap_pruned))
            node = heapq.heappop(heap)
            res = self._lp(node.lb, node.ub)
            self.nodes += 1
            if res.status != "optimal":
                continue
            if self._prunable(res.objective):
                if res.objective < self.upper:
                    gap_pruned = min(gap_pruned, res.objective)
                continue
            frac = _fractional(res.x, self.int_idx)
            if np.all(frac <= INT_TOL):
                found = self._fix_and_solve(np.round(res.x[self.int_idx]), node.lb, node.ub)
                if found is not None:
                    self._offer(*found)
                continue
            if self.heuristic_every and self.nodes % self.heuristic_every == 0:
                self._rounding(res.x, node.lb, node.ub)
                self._dive(res.x, node.lb, node.ub)
                if self.nodes % (4 * self.heuristic_every) == 0:
                    self._rins(res.x, node.lb, node.ub, self.time_limit - (time.perf_counter() - start))
            self._branch(heap, res.x, res.objective, node.lb, node.ub, node.depth + 1, seq)
            seq += 2

        if self.incumbent is None:
            return finish("infeasible", math.nan)
        bound = min(gap_pruned, heap[0].bound if heap else math.inf, self.upper)
        status = "optimal" if optimality_gap(bound, self.upper) <= 1e-7 else "gap_reached"
        return finish(status, bound)

    def _branch(self, heap, x, bound, lb, ub, depth, seq) -> None:
        frac = _fractional(x, self.int_idx)
        # most fractional = closest to one half; argmax returns the lowest index on ties
        score = np.where(frac > INT_TOL, 0.5 - np.abs(frac - 0.5), -1.0)
        k = int(np.argmax(score))
        j = int(self.int_idx[k])
        down_ub = ub.copy()
        down_ub[j] = math.floor(x[j])
        up_lb = lb.copy()
        up_lb[j] = math.ceil(x[j])
        heapq.heappush(heap, _Node(bound, seq, lb, down_ub, depth))
        heapq.heappush(heap, _Node(bound, seq + 1, up_lb, ub, depth))


def branch_and_bound(
    model: MilpModel,
    gap_tol: float = 1.0,
    time_limit: float = math.inf,
    node_limit: int | None = None,
    lp_method: str = "highs",
    start: np.ndarray | None = None,
) -> Solution:
    """Solve ``model`` to a relative gap of ``gap_tol`` percent.

    Returns the incumbent with status ``optimal`` (proven), ``gap_reached``
    (within tolerance), ``time_limit`` (limit hit; ``x`` may be ``None``),
    ``infeasible`` or ``unbounded``. ``start`` is an optional full column
    vector whose integer part seeds the incumbent when it is feasible.
    """
    if model.nnz > SIZE_WARNING_NNZ:
        log.warning(
            "model has %d nonzeros; the bundled solver targets desk-scale models, "
            "consider exporting MPS for an external solver",
            model.nnz,
        )
    return BranchAndBound(model, gap_tol, time_limit, node_limit, lp_method, start=start).solve()
