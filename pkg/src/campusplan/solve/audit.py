"""Feasibility audit computed from raw instance data.

The audit never reads the assembled constraint matrix. It walks the scenario
tree, recomputes every coefficient from the problem's coefficient oracle and
checks each family against the solution values looked up by symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..domain import HORIZON_START, predecessor
from ..model import Problem, VarCatalog, VarKey, budget_rhs, cohorts, node_periods
from .solution import Solution

AUDIT_FAMILIES = (
    "demand",
    "balance",
    "storage",
    "capacity",
    "emission",
    "budget",
    "spatial",
    "initialization",
    "horizon_start",
    "caps",
    "nonnegativity",
    "integrality",
)


class AuditError(ValueError):
    """Solution values cannot be matched to the model symbols."""


@dataclass
class FamilyAudit:
    checked: int = 0
    max_abs: float = 0.0
    max_rel: float = 0.0
    violations: int = 0
    total_abs: float = 0.0
    worst: str = ""

    def record(self, label: str, violation: float, scale: float, tol: float) -> None:
        self.checked += 1
        violation = max(violation, 0.0)
        rel = violation / max(1.0, scale)
        self.total_abs += violation
        if violation > self.max_abs:
            self.max_abs = violation
        if rel > self.max_rel:
            self.max_rel = rel
            self.worst = label
        if rel > tol:
            self.violations += 1


@dataclass
class AuditReport:
    families: dict[str, FamilyAudit] = field(default_factory=dict)
    tolerance: float = 1e-6

    @property
    def max_relative(self) -> float:
        return max((f.max_rel for f in self.families.values()), default=0.0)

    @property
    def ok(self) -> bool:
        return all(f.violations == 0 for f in self.families.values())

    def summary(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "ok": self.ok,
            "max_relative": self.max_relative,
            "families": {
                k: {
                    "checked": f.checked,
                    "violations": f.violations,
                    "max_abs": f.max_abs,
                    "max_rel": f.max_rel,
                    "worst": f.worst,
                }
                for k, f in self.families.items()
            },
        }


def _values(solution, catalog: VarCatalog) -> np.ndarray:
    if isinstance(solution, Solution):
        if solution.x is None:
            raise AuditError("solution carries no values")
        if solution.col_names is not None and list(solution.col_names) != catalog.names:
            lookup = dict(zip(solution.col_names, solution.x))
            x = np.array([lookup.get(name, np.nan) for name in catalog.names])
        else:
            x = np.asarray(solution.x, dtype=float)
    elif isinstance(solution, dict):
        x = np.array([solution.get(name, np.nan) for name in catalog.names], dtype=float)
    else:
        x = np.asarray(solution, dtype=float)
    if x.shape != (len(catalog),):
        raise AuditError(f"expected {len(catalog)} column values, got {x.shape}")
    missing = np.flatnonzero(~np.isfinite(x))
    if missing.size:
        names = [catalog.keys[i].name for i in missing[:3]]
        raise AuditError(f"{missing.size} columns missing or non-finite, e.g. {names}")
    return x


def audit(
    solution,
    problem: Problem,
    catalog: VarCatalog,
    tol: float = 1e-6,
    caps: dict | None = None,
) -> AuditReport:
    """Check a solution against every constraint family of ``problem``.

    Parameters
    ----------
    solution : Solution, mapping of column name to value, or array
    problem : Problem
        Raw inputs; coefficients are recomputed from these.
    catalog : VarCatalog
        Symbol lookup produced by the builder.
    tol : float
        Relative tolerance; each violation is divided by
        ``max(1, |rhs|, largest term magnitude)``.
    caps : dict, optional
        Installation caps keyed ``(tech, version, t, n)``; checked when given.
    """
    x = _values(solution, catalog)
    tree, data, co = problem.tree, problem.data, problem.coefficients
    Q = tree.horizon.subperiods_per_period
    root = tree.root_id
    demand = data.effective_demand
    eta_in, eta_out = problem.storage_efficiency
    rep = AuditReport({k: FamilyAudit() for k in AUDIT_FAMILIES}, tol)
    F = rep.families

    def val(key: VarKey) -> float:
        try:
            return float(x[catalog[key]])
        except KeyError:
            raise AuditError(f"catalog has no column {key.name}") from None

    def ops(kind: str, t: int, n: int) -> np.ndarray:
        return np.array([val(VarKey(kind, t=t, q=q, n=n)) for q in range(Q)])

    op_cache = {}
    for n, t in node_periods(tree):
        op_cache[(n, t)] = {k: ops(k, t, n) for k in ("c", "zplus", "zminus", "g")}

    # demand
    for n, t in node_periods(tree):
        if n == root:
            continue
        o = op_cache[(n, t)]
        lhs = o["g"] - o["zplus"] + o["zminus"]
        scale = np.maximum.reduce([np.abs(o["g"]), np.abs(o["zplus"]), np.abs(o["zminus"]), demand[t]])
        for spec in problem.generation_techs:
            for ver in spec.versions:
                for t0 in range(t + 1):
                    if spec.operational(t0, t):
                        term = co.generation(spec, ver, t0, t, n) * val(VarKey("v", spec.name, ver.name, t0, t, None, n))
                        lhs = lhs + term
                        scale = np.maximum(scale, np.abs(term))
        short = demand[t] - lhs
        for q in range(Q):
            F["demand"].record(f"demand[n={n},t={t},q={q}]", short[q], scale[q], tol)

    # cohort balance and initialization
    for spec in problem.techs:
        for ver in spec.versions:
            for t0, tp, n in cohorts(tree, spec):
                v = val(VarKey("v", spec.name, ver.name, t0, tp, None, n))
                plus = val(VarKey("vplus", spec.name, ver.name, t0, None, None, tree.ancestor(n, t0)))
                minus = sum(
                    val(VarKey("vminus", spec.name, ver.name, t0, t2, None, tree.ancestor(n, t2)))
                    for t2 in range(t0, tp + 1)
                )
                F["balance"].record(
                    f"balance[{spec.name},{ver.name},t={t0},tp={tp},n={n}]",
                    abs(v - plus + minus),
                    max(abs(v), abs(plus), abs(minus)),
                    tol,
                )
            for t in tree.node(root).periods:
                iota = data.fleet(spec.name, ver.name)
                got = val(VarKey("vplus", spec.name, ver.name, t, None, None, root))
                F["initialization"].record(f"init[{spec.name},{ver.name}]", abs(got - iota), abs(iota), tol)

    # storage state of charge, capacity, horizon start
    for n, t in node_periods(tree):
        o = op_cache[(n, t)]
        if n == root:
            for kind, arr in o.items():
                F["horizon_start"].record(f"{kind}[t={t},n={n}]", float(np.abs(arr).max(initial=0.0)), 0.0, tol)
        else:
            for q in range(Q):
                prev = predecessor(tree, q, t, n)
                c_prev = 0.0 if prev == HORIZON_START else op_cache[(prev.n, prev.t)]["c"][prev.q]
                terms = (o["c"][q], c_prev, eta_in * o["zplus"][q], o["zminus"][q] / eta_out)
                resid = terms[0] - terms[1] - terms[2] + terms[3]
                F["storage"].record(f"storage[n={n},t={t},q={q}]", abs(resid), max(map(abs, terms)), tol)
        cap = np.zeros(Q)
        for spec in problem.storage_techs:
            for ver in spec.versions:
                for t0 in range(t + 1):
                    if spec.operational(t0, t):
                        cap += co.storage_capacity(spec, ver, t0, t, n) * val(VarKey("v", spec.name, ver.name, t0, t, None, n))
        for q in range(Q):
            F["capacity"].record(
                f"capacity[n={n},t={t},q={q}]", o["c"][q] - cap[q], max(abs(o["c"][q]), abs(cap[q])), tol
            )

    # emission, budget, spatial
    for n, t in node_periods(tree):
        if n != root and math.isfinite(data.emission_cap[t]):
            em = data.emission_factor[t] * op_cache[(n, t)]["g"].sum()
            F["emission"].record(f"emission[n={n},t={t}]", em - data.emission_cap[t], max(abs(em), data.emission_cap[t]), tol)
        if math.isfinite(data.budget[t]):
            spend = sum(
                co.install_cost(spec, ver, t, n) * val(VarKey("vplus", spec.name, ver.name, t, None, None, n))
                for spec in problem.techs
                for ver in spec.versions
            )
            phi = budget_rhs(problem, t, n)
            F["budget"].record(f"budget[n={n},t={t}]", spend - phi, max(abs(spend), phi), tol)
        if math.isfinite(data.area_cap[t]):
            area = sum(
                co.spatial(spec, ver, t0, n) * val(VarKey("v", spec.name, ver.name, t0, t, None, n))
                for spec in problem.techs
                for ver in spec.versions
                for t0 in range(t + 1)
                if spec.operational(t0, t)
            )
            F["spatial"].record(f"spatial[n={n},t={t}]", area - data.area_cap[t], max(abs(area), data.area_cap[t]), tol)

    # domains
    for i, key in enumerate(catalog.keys):
        F["nonnegativity"].record(key.name, -x[i], 0.0, tol)
        spec = problem.tech(key.tech) if key.tech is not None else None
        if spec is not None and spec.is_generation and key.kind in ("vplus", "vminus"):
            F["integrality"].record(key.name, abs(x[i] - round(x[i])), 0.0, tol)
            if caps is not None:
                install_node = key.n if key.kind == "vplus" else tree.ancestor(key.n, key.t)
                m = caps[(key.tech, key.version, key.t, install_node)]
                F["caps"].record(key.name, x[i] - m, m, tol)
    return rep
