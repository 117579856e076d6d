"""Reports derived from solved plans.

Everything here consumes a solved :class:`~campusplan.model.Problem` and
produces plain records: per-path cost decompositions, yearly supply mixes,
sensitivity tables, the temporal-aggregation study and the violation tables
of a deterministic plan replayed under each scenario path.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .domain import Branch, ScenarioNode, ScenarioTree
from .model import (
    BuildResult,
    Case,
    MilpModel,
    Problem,
    VarKey,
    aggregate_problem,
    apply_case,
    budget_rhs,
    build,
    cohorts,
    node_periods,
)
from .scenario import ScenarioPath, build_scenario_tree, path_label, scenario_paths
from .solve.audit import AuditReport, _values, audit
from .solve.bnb import branch_and_bound
from .solve.lp import solve_lp
from .solve.solution import Solution

SENSITIVITY_HEADERS = (
    "Case",
    "Total Cost",
    "Installation Cost",
    "Grid Purchase Cost",
    "O&M Cost",
    "Optimality Gap",
    "Time",
)
AGGREGATION_HEADERS = (
    "Operational Resolution",
    "Objective Value",
    "Average Demand Violation",
    "Average Cost of Demand Violation",
    "Optimality Gap",
    "Time",
)
SHARE_TOL = 1e-9
MEAN_MODES = ("mean", "geometric")


class UnauditedSolutionError(ValueError):
    """Reports are only produced for solutions that passed the audit."""


class AccountingError(ArithmeticError):
    """Supply attribution produced a share outside [0, 1]."""


def _require_audit(report: AuditReport | None) -> None:
    if report is None:
        raise UnauditedSolutionError("solution has not been audited")
    if not report.ok:
        raise UnauditedSolutionError(f"solution failed the audit (max relative violation {report.max_relative:.3g})")


# -- solving -----------------------------------------------------------------------


@dataclass
class PlanRun:
    """A problem together with its model, solution and audit."""

    problem: Problem
    built: BuildResult
    solution: Solution
    report: AuditReport | None

    @property
    def ok(self) -> bool:
        return self.solution.has_incumbent and self.report is not None and self.report.ok


def solve_problem(
    problem: Problem,
    gap: float = 1.0,
    time_limit: float = math.inf,
    node_limit: int | None = None,
    m_scale: float = 1.0,
    start=None,
) -> PlanRun:
    """Build, solve and audit ``problem``.

    ``start`` may be a previous :class:`Solution` (or a name-to-value mapping)
    of a problem with the same columns; its integer decisions seed the search
    whenever they are feasible here.
    """
    built = build(problem, m_scale=m_scale)
    x0 = None if start is None else _start_vector(start, built.model)
    solution = branch_and_bound(built.model, gap, time_limit, node_limit, start=x0)
    report = audit(solution, problem, built.catalog, caps=built.big_m) if solution.has_incumbent else None
    return PlanRun(problem, built, solution, report)


def _start_vector(start, model) -> np.ndarray | None:
    if isinstance(start, Solution):
        if not start.has_incumbent:
            return None
        start = dict(zip(start.col_names, start.x))
    return np.array([float(start.get(name, 0.0)) for name in model.col_names])


def sweep(
    problem: Problem,
    cases: Iterable[Case | str],
    gap: float = 1.0,
    time_limit: float = math.inf,
    node_limit: int | None = None,
) -> list[PlanRun]:
    """Solve cases in order, seeding each search with the previous plan.

    When every case relaxes the one before it (a larger budget or emission
    allowance, a lower price) the earlier plan stays feasible, so the reported
    objectives cannot increase along the sweep even though each solve stops
    at the gap tolerance.
    """
    runs: list[PlanRun] = []
    prev = None
    for case in cases:
        run = solve_problem(apply_case(problem, case), gap, time_limit, node_limit, start=prev)
        runs.append(run)
        prev = run.solution if run.solution.has_incumbent else prev
    return runs


# -- cost decomposition ---------------------------------------------------------


@dataclass
class PathReport:
    path: str
    label: str
    probability: float
    installation: float
    grid: float
    om: float
    salvage: float
    grid_energy: float
    generation: dict[str, float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.installation + self.grid + self.om - self.salvage


def decompose_costs(
    solution,
    problem: Problem,
    catalog,
    report: AuditReport | None,
) -> list[PathReport]:
    """Discounted cost components along every scenario path.

    Each component uses the same discount powers as the objective, so the
    probability-weighted sum of path totals reproduces the objective value.
    ``generation`` holds the available output of each technology summed over
    the path (before curtailment).
    """
    _require_audit(report)
    x = _values(solution, catalog)
    tree, data, co = problem.tree, problem.data, problem.coefficients
    beta = data.discount_factor
    root = tree.root_id

    def val(key):
        return float(x[catalog[key]])

    per_node: dict[int, dict] = {}
    for n, t in node_periods(tree):
        if n == root:
            continue
        acc = per_node.setdefault(
            n, {"inst": 0.0, "grid": 0.0, "om": 0.0, "salv": 0.0, "energy": 0.0, "gen": {}}
        )
        disc = beta ** (t - 1)
        g = x[catalog.ops("g", t, n, tree.horizon.subperiods_per_period)]
        acc["grid"] += disc * data.tariff[t] * float(g.sum())
        acc["energy"] += float(g.sum())
        for spec in problem.techs:
            for ver in spec.versions:
                acc["inst"] += disc * co.install_cost(spec, ver, t, n) * val(VarKey("vplus", spec.name, ver.name, t, None, None, n))
    for spec in problem.techs:
        for ver in spec.versions:
            for t0, tp, n in cohorts(tree, spec):
                if n == root:
                    continue
                acc = per_node[n]
                disc = beta ** (tp - 1)
                v = val(VarKey("v", spec.name, ver.name, t0, tp, None, n))
                acc["om"] += disc * co.om_cost(spec, ver, t0, tp, n) * v
                acc["salv"] += disc * co.salvage_value(spec, ver, t0, tp, n) * val(
                    VarKey("vminus", spec.name, ver.name, t0, tp, None, n)
                )
                if spec.is_generation:
                    out = float(co.generation(spec, ver, t0, tp, n).sum()) * v
                    acc["gen"][spec.name] = acc["gen"].get(spec.name, 0.0) + out

    reports = []
    for path in scenario_paths(tree):
        r = PathReport(path.name, path.label, path.probability, 0.0, 0.0, 0.0, 0.0, 0.0,
                       {s.name: 0.0 for s in problem.generation_techs})
        for n in path.nodes:
            if n == root:
                continue
            acc = per_node[n]
            r.installation += acc["inst"]
            r.grid += acc["grid"]
            r.om += acc["om"]
            r.salvage += acc["salv"]
            r.grid_energy += acc["energy"]
            for k, v in acc["gen"].items():
                r.generation[k] += v
        reports.append(r)
    return reports


def expected_costs(reports: Sequence[PathReport]) -> dict[str, float]:
    """Probability-weighted cost components over all paths."""
    out = {"installation": 0.0, "grid": 0.0, "om": 0.0, "salvage": 0.0, "total": 0.0}
    for r in reports:
        out["installation"] += r.probability * r.installation
        out["grid"] += r.probability * r.grid
        out["om"] += r.probability * r.om
        out["salvage"] += r.probability * r.salvage
        out["total"] += r.probability * r.total
    return out


def path_reports_csv(reports: Sequence[PathReport]) -> str:
    techs = sorted({k for r in reports for k in r.generation})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path", "label", "probability", "installation", "grid", "om", "salvage", "total", "grid_energy"]
               + [f"generation_{k}" for k in techs])
    for r in reports:
        w.writerow([r.path, r.label, _fmt(r.probability), _fmt(r.installation), _fmt(r.grid), _fmt(r.om),
                    _fmt(r.salvage), _fmt(r.total), _fmt(r.grid_energy)]
                   + [_fmt(r.generation.get(k, 0.0)) for k in techs])
    return buf.getvalue()


# -- supply mix -----------------------------------------------------------------


@dataclass
class SupplyMix:
    path: str
    years: np.ndarray
    renewable: np.ndarray
    storage: np.ndarray
    grid: np.ndarray

    def rows(self):
        for i, t in enumerate(self.years):
            yield int(t), float(self.renewable[i]), float(self.storage[i]), float(self.grid[i])


def supply_mix(
    solution,
    problem: Problem,
    catalog,
    path: ScenarioPath | str,
    report: AuditReport | None,
) -> SupplyMix:
    """Yearly shares of demand met by renewables, storage and the grid.

    Per sub-period, grid purchases up to the demand count as grid supply,
    net storage discharge (discharge minus charge) up to the remaining demand
    counts as storage supply, and the rest of the demand is direct renewable
    supply. Grid energy bought beyond the demand only charges the battery and
    is counted when that energy is discharged; renewable output beyond the
    demand is curtailment and is not attributed. Years with zero demand are
    omitted.
    """
    _require_audit(report)
    x = _values(solution, catalog)
    tree, data, co = problem.tree, problem.data, problem.coefficients
    Q = tree.horizon.subperiods_per_period
    if isinstance(path, str):
        match = [p for p in scenario_paths(tree) if path in (p.name, p.label)]
        if not match:
            raise KeyError(f"no scenario path named {path!r}")
        path = match[0]
    demand = data.effective_demand
    years, shares = [], []
    for n in path.nodes:
        if n == tree.root_id:
            continue
        for t in tree.periods_of(n):
            d = demand[t]
            total = float(d.sum())
            if total <= 0:
                continue
            g = x[catalog.ops("g", t, n, Q)]
            zp = x[catalog.ops("zplus", t, n, Q)]
            zm = x[catalog.ops("zminus", t, n, Q)]
            avail = np.zeros(Q)
            for spec in problem.generation_techs:
                for ver in spec.versions:
                    for t0 in range(t + 1):
                        if spec.operational(t0, t):
                            avail += co.generation(spec, ver, t0, t, n) * x[catalog[VarKey("v", spec.name, ver.name, t0, t, None, n)]]
            grid = np.minimum(g, d)
            stor = np.minimum(np.maximum(zm - zp, 0.0), d - grid)
            direct = d - grid - stor
            scale = max(1.0, total)
            if np.any(direct > avail + 1e-6 * np.maximum(1.0, d)):
                raise AccountingError(f"renewable attribution exceeds available output in year {t}")
            share = np.array([direct.sum(), stor.sum(), grid.sum()]) / total
            if np.any(share < -SHARE_TOL) or np.any(share > 1 + SHARE_TOL) or abs(share.sum() - 1) > 1e-9 * scale:
                raise AccountingError(f"supply shares {share} out of range in year {t}")
            years.append(t)
            shares.append(np.clip(share, 0.0, 1.0))
    arr = np.array(shares).reshape(-1, 3)
    return SupplyMix(path.name, np.array(years, dtype=int), arr[:, 0], arr[:, 1], arr[:, 2])


# -- sensitivity ------------------------------------------------------------------


@dataclass
class SensitivityRow:
    case: str
    total: float
    installation: float
    grid: float
    om: float
    gap: float
    time: float
    status: str

    def cells(self) -> list:
        return [self.case, self.total, self.installation, self.grid, self.om, self.gap, self.time]


def _case_row(problem: Problem, case: Case, gap, time_limit, node_limit) -> SensitivityRow:
    run = solve_problem(apply_case(problem, case), gap, time_limit, node_limit)
    sol = run.solution
    if not run.ok:
        status = sol.status if not sol.has_incumbent else "audit_failed"
        nan = math.nan
        return SensitivityRow(case.key, nan, nan, nan, nan, sol.gap, sol.wall_time, status)
    exp = expected_costs(decompose_costs(sol, run.problem, run.built.catalog, run.report))
    # installation is reported net of the salvage credit so the components add up to the total
    return SensitivityRow(
        case.key,
        sol.objective,
        exp["installation"] - exp["salvage"],
        exp["grid"],
        exp["om"],
        sol.gap,
        sol.wall_time,
        sol.status,
    )


def run_sensitivity(
    problem: Problem,
    cases: Iterable[Case | str],
    gap: float = 1.0,
    time_limit: float = math.inf,
    node_limit: int | None = None,
    workers: int = 1,
) -> list[SensitivityRow]:
    """Solve each case and tabulate expected cost components.

    Rows come back in the order the cases were given whatever ``workers`` is.
    """
    parsed = [Case.parse(c) if isinstance(c, str) else c for c in cases]
    keys = [c.key for c in parsed]
    if len(set(keys)) != len(keys):
        raise ValueError("duplicate sensitivity cases")
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            futures = [pool.submit(_case_row, problem, c, gap, time_limit, node_limit) for c in parsed]
            return [f.result() for f in futures]
    return [_case_row(problem, c, gap, time_limit, node_limit) for c in parsed]


# -- fixed-plan operations ------------------------------------------------------


@dataclass
class OperationsResult:
    status: str
    cost: float
    # unmet demand per (node, period), one entry per sub-period
    shortfall: dict[tuple[int, int], np.ndarray]
    violation_energy: float
    violation_cost: float

    def by_period(self, nodes: Sequence[int]) -> dict[int, float]:
        out: dict[int, float] = {}
        for (n, t), s in self.shortfall.items():
            if n in nodes:
                out[t] = out.get(t, 0.0) + float(s.sum())
        return dict(sorted(out.items()))


def plan_of(solution, catalog) -> dict[VarKey, float]:
    """Installation and retirement decisions of a solution, keyed by symbol."""
    x = _values(solution, catalog)
    return {k: float(x[i]) for i, k in enumerate(catalog.keys) if k.kind in ("vplus", "vminus")}


def evaluate_plan(problem: Problem, plan: dict[VarKey, float], enforce_budget: bool = False) -> OperationsResult:
    """Operate a frozen plan, covering any unmet demand with priced slack.

    The slack in each demand row costs the grid tariff of its period. Slack
    is a last resort: the operations are solved lexicographically, first the
    least priced shortfall, then the cheapest operation that keeps it. The
    result is always feasible.
    """
    built = build(problem, cap_rows=False, m_fallback=0)
    model, cat = built.model, built.catalog
    tree, data = problem.tree, problem.data
    beta = data.discount_factor
    lb, ub = model.lb.copy(), model.ub.copy()
    for key, value in plan.items():
        j = cat.get(key)
        if j is None:
            raise KeyError(f"plan column {key.name} does not exist in this problem")
        lb[j] = ub[j] = value
    keep = np.array([enforce_budget or f != "budget" for f in built.row_family])
    demand_rows = np.flatnonzero(np.array(built.row_family) == "demand")
    row_nq = []
    for i in demand_rows:
        name = model.row_names[i]
        n, t, q = (int(part.split("=")[1]) for part in name[len("demand["):-1].split(","))
        row_nq.append((n, t, q))
    k = len(demand_rows)
    S = sp.csr_matrix((np.ones(k), (demand_rows, np.arange(k))), shape=(model.n_rows, k))
    slack_cost = np.array([tree.prob(n) * beta ** (t - 1) * data.tariff[t] for n, t, _ in row_nq])
    A = sp.hstack([model.A, S], format="csr")[keep]
    base = MilpModel(
        A=A,
        sense=model.sense[keep],
        rhs=model.rhs[keep],
        c=np.concatenate([model.c, slack_cost]),
        lb=np.concatenate([lb, np.zeros(k)]),
        ub=np.concatenate([ub, np.full(k, np.inf)]),
        integer=np.zeros(model.n_cols + k, dtype=bool),
        row_names=[r for r, f in zip(model.row_names, keep) if f],
        col_names=list(model.col_names) + [f"slack[n={n},t={t},q={q}]" for n, t, q in row_nq],
    )
    # stage one: least priced shortfall, whatever the operating cost
    first = solve_lp(dataclasses.replace(base, c=np.concatenate([np.zeros(model.n_cols), slack_cost])))
    if first.status != "optimal":
        return OperationsResult(first.status, math.nan, {}, math.nan, math.nan)
    weights = np.array([tree.prob(n) for n, _, _ in row_nq])
    w = first.objective
    cap_row = sp.csr_matrix((slack_cost, (np.zeros(k, dtype=int), model.n_cols + np.arange(k))), shape=(1, base.n_cols))
    # stage two: cheapest operation keeping the shortfall at that level
    second_model = MilpModel(
        A=sp.vstack([base.A, cap_row], format="csr"),
        sense=np.concatenate([base.sense, np.array(["L"])]),
        rhs=np.concatenate([base.rhs, [w + 1e-9 * max(1.0, abs(w))]]),
        c=base.c,
        lb=base.lb,
        ub=base.ub,
        integer=base.integer,
        row_names=base.row_names + ["shortfall_cap"],
        col_names=base.col_names,
    )
    second = solve_lp(second_model)
    x = second.x if second.status == "optimal" else first.x
    s = x[model.n_cols:].copy()
    # shortfalls at LP tolerance level are solver noise, not unmet demand
    s[s <= 1e-7 * max(1.0, float(np.max(data.demand)))] = 0.0
    shortfall: dict[tuple[int, int], np.ndarray] = {}
    Q = tree.horizon.subperiods_per_period
    for (n, t, q), value in zip(row_nq, s):
        shortfall.setdefault((n, t), np.zeros(Q))[q] = value
    energy = float(weights @ s)
    cost = float(slack_cost @ s)
    return OperationsResult("optimal", float(base.c @ x), shortfall, energy, cost)


# -- temporal aggregation ----------------------------------------------------------


@dataclass
class AggregationRow:
    block: int
    resolution: str
    objective: float
    violation_energy: float
    violation_cost: float
    gap: float
    time: float
    status: str

    def cells(self) -> list:
        return [self.resolution, self.objective, self.violation_energy, self.violation_cost, self.gap, self.time]


def aggregation_study(
    problem: Problem,
    blocks: Iterable[int],
    gap: float = 1.0,
    time_limit: float = math.inf,
    node_limit: int | None = None,
) -> list[AggregationRow]:
    """Solve coarser models and replay their plans at the original resolution.

    Violation energy and cost are expectations over the scenario tree; the
    cost is discounted like the objective and priced at the grid tariff.
    """
    hours = problem.horizon.subperiod_hours
    rows = []
    for block in blocks:
        block = int(block)
        coarse = aggregate_problem(problem, block)
        run = solve_problem(coarse, gap, time_limit, node_limit)
        sol = run.solution
        label = f"{block * hours:g}-hour"
        if not run.ok:
            rows.append(AggregationRow(block, label, sol.objective, math.nan, math.nan, sol.gap, sol.wall_time,
                                       sol.status if not sol.has_incumbent else "audit_failed"))
            continue
        ops = evaluate_plan(problem, plan_of(sol, run.built.catalog), enforce_budget=True)
        rows.append(
            AggregationRow(block, label, sol.objective, ops.violation_energy, ops.violation_cost, sol.gap,
                           sol.wall_time, sol.status)
        )
    return rows


# -- deterministic plan ------------------------------------------------------------


def _mean_branch(group: Sequence[Branch], mode: str) -> Branch:
    p = np.array([b.probability for b in group])
    cost = np.array([b.cost_multiplier for b in group])
    eff = np.array([b.efficiency_multiplier for b in group])
    if mode == "mean":
        return Branch(float(p @ cost), float(p @ eff), 1.0, "d")
    return Branch(float(np.exp(p @ np.log(cost))), float(np.exp(p @ np.log(eff))), 1.0, "d")


def deterministic_problem(problem: Problem, mode: str = "mean") -> Problem:
    """Single-path problem using one representative multiplier per transition.

    ``mode="mean"`` averages the branch multipliers with their probabilities;
    ``mode="geometric"`` exponentiates the probability-weighted log rates.
    """
    if mode not in MEAN_MODES:
        raise ValueError(f"unknown averaging mode {mode!r}; expected one of {MEAN_MODES}")
    techs = []
    for spec in problem.techs:
        techs.append(
            dataclasses.replace(
                spec,
                branches=(_mean_branch(spec.branches, mode),),
                stage_branches=tuple((_mean_branch(g, mode),) for g in spec.stage_branches),
            )
        )
    tree = build_scenario_tree(techs, problem.horizon)
    return Problem(tree, tuple(techs), problem.data, problem.degradation)


def path_problem(problem: Problem, path: ScenarioPath) -> Problem:
    """The chain of nodes on ``path`` as a probability-one scenario tree."""
    tree = problem.tree
    nodes = []
    for stage, n in enumerate(path.nodes):
        node = tree.node(n)
        nodes.append(
            ScenarioNode(stage, stage, stage - 1 if stage else None, 1.0, node.periods, node.state, node.labels)
        )
    chain = ScenarioTree(nodes, tree.horizon, tree.label_techs)
    return Problem(chain, problem.techs, problem.data, problem.degradation)


@dataclass
class PathViolations:
    path: str
    label: str
    probability: float
    budget: dict[int, float]
    demand: dict[int, float]

    @property
    def budget_total(self) -> float:
        return float(sum(self.budget.values()))

    @property
    def demand_total(self) -> float:
        return float(sum(self.demand.values()))


@dataclass
class DeterministicAudit:
    run: PlanRun
    mean: PathViolations
    paths: list[PathViolations]


def _violations(problem: Problem, plan, name, label, probability) -> PathViolations:
    tree, co, data = problem.tree, problem.coefficients, problem.data
    budget = {}
    for n, t in node_periods(tree):
        if n == tree.root_id or not math.isfinite(data.budget[t]):
            continue
        spend = sum(
            co.install_cost(spec, ver, t, n) * plan[VarKey("vplus", spec.name, ver.name, t, None, None, n)]
            for spec in problem.techs
            for ver in spec.versions
        )
        budget[t] = max(0.0, spend - budget_rhs(problem, t, n))
    ops = evaluate_plan(problem, plan)
    return PathViolations(name, label, probability, budget, ops.by_period(list(tree.order)))


def deterministic_audit(
    problem: Problem,
    mode: str = "mean",
    gap: float = 1.0,
    time_limit: float = math.inf,
    node_limit: int | None = None,
) -> DeterministicAudit:
    """Solve the deterministic counterpart and replay its plan on every path.

    Budget violations are the yearly install spend above the budget at the
    realized prices; demand violations are the unmet energy of the fixed-plan
    operations at the realized outputs.
    """
    det = deterministic_problem(problem, mode)
    run = solve_problem(det, gap, time_limit, node_limit)
    if not run.ok:
        raise RuntimeError(f"deterministic model ended with status {run.solution.status}")
    plan = plan_of(run.solution, run.built.catalog)
    mean = _violations(det, plan, "mean", "mean", 1.0)
    paths = [
        _violations(path_problem(problem, p), plan, p.name, p.label, p.probability)
        for p in scenario_paths(problem.tree)
    ]
    return DeterministicAudit(run, mean, paths)


def _violation_rows(result: DeterministicAudit, kind: str, years: Sequence[int]) -> list[list]:
    out = []
    for r in (result.mean, *result.paths):
        values = getattr(r, kind)
        out.append([r.path, r.label, _fmt(r.probability)] + [_fmt(values.get(t, 0.0)) for t in years]
                   + [_fmt(sum(values.values()))])
    return out


def _violation_years(result: DeterministicAudit, kinds: Sequence[str]) -> list[int]:
    return sorted({t for r in (result.mean, *result.paths) for kind in kinds for t in getattr(r, kind)})


def violation_table_csv(result: DeterministicAudit, kind: str) -> str:
    """Per-path yearly violations (``kind`` is ``"budget"`` or ``"demand"``)."""
    if kind not in ("budget", "demand"):
        raise ValueError(f"unknown violation kind {kind!r}")
    years = _violation_years(result, [kind])
    return table_csv(["path", "label", "probability"] + [f"year_{t}" for t in years] + ["total"],
                     _violation_rows(result, kind, years))


def violation_tables_csv(result: DeterministicAudit) -> str:
    """Budget and demand violations in one table, tagged by a leading column."""
    years = _violation_years(result, ["budget", "demand"])
    rows = [[kind] + row for kind in ("budget", "demand") for row in _violation_rows(result, kind, years)]
    return table_csv(["violation", "path", "label", "probability"] + [f"year_{t}" for t in years] + ["total"], rows)


# -- documents ----------------------------------------------------------------


def decision_tree(solution, problem: Problem, catalog) -> dict:
    """Per-node yearly installation and retirement decisions.

    Each node lists, per technology, the installed capacity per year (count
    times rated capacity) and the raw counts per version, so the document can
    be laid out as a node-by-year matrix.
    """
    x = _values(solution, catalog)
    tree = problem.tree
    nodes = []
    for nid in tree.order:
        node = tree.node(nid)
        techs = {}
        for spec in problem.techs:
            capacity, counts, retired = {}, {}, {}
            for ver in spec.versions:
                per_ver = {}
                for t in node.periods:
                    v = float(x[catalog[VarKey("vplus", spec.name, ver.name, t, None, None, nid)]])
                    per_ver[str(t)] = _clean(v)
                    capacity[str(t)] = _clean(capacity.get(str(t), 0.0) + v * ver.rated_capacity)
                    r = sum(
                        float(x[catalog[VarKey("vminus", spec.name, ver.name, t0, t, None, nid)]])
                        for t0 in range(t + 1)
                        if spec.operational(t0, t)
                    )
                    retired[str(t)] = _clean(retired.get(str(t), 0.0) + r)
                counts[ver.name] = per_ver
            techs[spec.name] = {"installed_capacity": capacity, "installed_count": counts, "retired_count": retired}
        nodes.append(
            {
                "id": nid,
                "stage": node.stage,
                "parent": node.parent,
                "probability": node.probability,
                "label": path_label(tree, nid),
                "periods": list(node.periods),
                "technologies": techs,
            }
        )
    return {"nodes": nodes}


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def table_csv(headers: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(headers)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _clean(v: float) -> float:
    # LP values within 1e-9 of an integer print as that integer
    r = round(v)
    return float(r) if abs(v - r) < 1e-9 else v


def _fmt(v: float) -> str:
    if isinstance(v, float) and math.isnan(v):
        return ""
    return format(float(v) + 0.0, ".10g")
