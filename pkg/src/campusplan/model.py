"""Assembly of the multi-stage stochastic capacity planning MILP.

Columns
    ``vplus``   units installed in period ``t`` at node ``n``
    ``vminus``  units of install cohort ``t`` retired in period ``t'``
    ``v``       units of cohort ``t`` operating in period ``t'``
    ``c``       stored energy at the end of sub-period ``q``
    ``zplus``   energy drawn into storage, ``zminus`` energy released
    ``g``       grid purchase

Rows (family names used in row labels)
    ``demand``, ``balance`` (cohort accounting), ``storage`` (state of
    charge), ``capacity``, ``emission``, ``budget``, ``spatial``, and the
    explicit installation caps ``vplus_cap`` / ``vminus_cap``.

The root node owns period 0. Its install columns are fixed to the
pre-existing fleet by bounds and its operational block (``c``, ``z``, ``g``)
is fixed at zero; it carries capacity, budget and spatial rows but no demand
or storage rows. The first operational sub-period starts with an empty store.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .domain import (
    HORIZON_START,
    DomainError,
    Horizon,
    InstanceData,
    ScenarioTree,
    TechnologySpec,
    predecessor,
)
from .profiles import Coefficients, aggregate

VAR_KINDS = ("vplus", "vminus", "v", "c", "zplus", "zminus", "g")
ROW_FAMILIES = (
    "demand",
    "balance",
    "storage",
    "capacity",
    "emission",
    "budget",
    "spatial",
    "vplus_cap",
    "vminus_cap",
)


class BuildError(DomainError):
    """Inputs that cannot be assembled into a model."""


class BigMError(BuildError):
    """No positive generation coefficient bounds the installation count."""


class VarKey(NamedTuple):
    kind: str
    tech: str | None = None
    version: str | None = None
    t: int | None = None
    tp: int | None = None
    q: int | None = None
    n: int | None = None

    @property
    def name(self) -> str:
        if self.kind == "vplus":
            return f"vplus[{self.tech},{self.version},t={self.t},n={self.n}]"
        if self.kind in ("vminus", "v"):
            return f"{self.kind}[{self.tech},{self.version},t={self.t},tp={self.tp},n={self.n}]"
        return f"{self.kind}[q={self.q},t={self.t},n={self.n}]"


class VarCatalog:
    """Bijection between column indices and model symbols."""

    def __init__(self):
        self.keys: list[VarKey] = []
        self._index: dict[VarKey, int] = {}

    def add(self, key: VarKey) -> int:
        if key in self._index:
            raise BuildError(f"duplicate column {key.name}")
        self._index[key] = len(self.keys)
        self.keys.append(key)
        return self._index[key]

    def __len__(self) -> int:
        return len(self.keys)

    def __getitem__(self, key: VarKey) -> int:
        return self._index[key]

    def __contains__(self, key: VarKey) -> bool:
        return key in self._index

    def get(self, key: VarKey, default=None):
        return self._index.get(key, default)

    def of_kind(self, kind: str) -> list[int]:
        return [i for i, k in enumerate(self.keys) if k.kind == kind]

    def ops(self, kind: str, t: int, n: int, Q: int) -> np.ndarray:
        """Column indices of an operational block, one per sub-period."""
        first = self._index[VarKey(kind, t=t, q=0, n=n)]
        return np.arange(first, first + Q)

    @property
    def names(self) -> list[str]:
        return [k.name for k in self.keys]


@dataclass
class MilpModel:
    """Sparse minimization model ``min c'x`` s.t. ``A x (sense) rhs``, bounds, integrality."""

    A: sp.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    row_names: list[str]
    col_names: list[str]
    name: str = "campusplan"

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A, dtype=float)
        m, n = self.A.shape
        self.sense = np.asarray(self.sense, dtype="<U1")
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        self.integer = np.asarray(self.integer, dtype=bool)
        if self.sense.shape != (m,) or self.rhs.shape != (m,) or len(self.row_names) != m:
            raise BuildError("row data does not match the matrix height")
        for arr in (self.c, self.lb, self.ub, self.integer):
            if arr.shape != (n,):
                raise BuildError("column data does not match the matrix width")
        if len(self.col_names) != n:
            raise BuildError("column names do not match the matrix width")
        if not set(self.sense.tolist()) <= {"L", "G", "E"}:
            raise BuildError("row senses must be L, G or E")
        if not (np.all(np.isfinite(self.A.data)) and np.all(np.isfinite(self.c))):
            raise BuildError("non-finite coefficient")

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    @property
    def n_integer(self) -> int:
        return int(self.integer.sum())

    @property
    def n_continuous(self) -> int:
        return self.n_cols - self.n_integer

    @property
    def nnz(self) -> int:
        return self.A.nnz

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x)

    def with_bounds(self, lb=None, ub=None) -> MilpModel:
        return dataclasses.replace(
            self,
            lb=self.lb if lb is None else np.asarray(lb, dtype=float),
            ub=self.ub if ub is None else np.asarray(ub, dtype=float),
        )


# -- problem container --------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    """Everything needed to assemble one model instance."""

    tree: ScenarioTree
    techs: tuple[TechnologySpec, ...]
    data: InstanceData
    degradation: str = "geometric"

    def __post_init__(self):
        object.__setattr__(self, "techs", tuple(self.techs))
        h = self.tree.horizon
        if self.data.periods != h.periods:
            raise BuildError(f"instance covers {self.data.periods} periods, horizon has {h.periods}")
        if self.data.demand.shape[1] != h.subperiods_per_period:
            raise BuildError(
                f"demand has {self.data.demand.shape[1]} sub-periods, horizon has {h.subperiods_per_period}"
            )
        if len({t.name for t in self.techs}) != len(self.techs):
            raise BuildError("duplicate technology names")
        effs = {(v.charge_efficiency, v.discharge_efficiency) for t in self.storage_techs for v in t.versions}
        if len(effs) > 1:
            raise BuildError("all storage technologies must share charge/discharge efficiencies")
        for (tech, version) in self.data.initial_fleet:
            spec = self.tech(tech)
            spec.version(version)

    @property
    def horizon(self) -> Horizon:
        return self.tree.horizon

    @property
    def generation_techs(self) -> list[TechnologySpec]:
        return [t for t in self.techs if t.is_generation]

    @property
    def storage_techs(self) -> list[TechnologySpec]:
        return [t for t in self.techs if not t.is_generation]

    @property
    def storage_efficiency(self) -> tuple[float, float]:
        for t in self.storage_techs:
            v = t.versions[0]
            return v.charge_efficiency, v.discharge_efficiency
        return 1.0, 1.0

    def tech(self, name: str) -> TechnologySpec:
        for t in self.techs:
            if t.name == name:
                return t
        raise KeyError(f"unknown technology {name!r}")

    @cached_property
    def coefficients(self) -> Coefficients:
        return Coefficients(self.tree, self.techs, self.data, self.degradation)

    def replace(self, **changes) -> Problem:
        return dataclasses.replace(self, **changes)


def node_periods(tree: ScenarioTree) -> Iterator[tuple[int, int]]:
    for node in tree:
        for t in node.periods:
            yield node.id, t


def cohorts(tree: ScenarioTree, spec: TechnologySpec) -> Iterator[tuple[int, int, int]]:
    """``(t_install, t_operating, n)`` for every operating-count index."""
    for n, tp in node_periods(tree):
        for t in range(tp + 1):
            if spec.operational(t, tp):
                yield t, tp, n


def budget_rhs(problem: Problem, t: int, n: int) -> float:
    """Budget available at ``(t, n)``; the existing fleet at the root is sunk and never charged."""
    phi = float(problem.data.budget[t])
    if n != problem.tree.root_id:
        return phi
    co = problem.coefficients
    sunk = sum(
        co.install_cost(spec, ver, t, n) * problem.data.fleet(spec.name, ver.name)
        for spec in problem.techs
        for ver in spec.versions
    )
    return phi + sunk


# -- big-M ----------------------------------------------------------------


def _ceil(x: float) -> int:
    # guard against 30/3 evaluating to 10.000000000000002
    return int(math.ceil(x - 1e-9 * max(1.0, abs(x))))


def big_m(problem: Problem, tech, version, t: int, n: int, fallback: int | None = None) -> int:
    """Worst-case demand-to-output ratio over a cohort's service window.

    The maximum runs over every node below ``n``, every operating period
    ``t' >= 1`` in ``[t, t + lifetime)`` and every sub-period with positive
    per-unit output. Output depends on the install node and age only, so
    the node dimension collapses for a fixed operating period.
    """
    spec = problem.tech(tech) if isinstance(tech, str) else tech
    ver = spec.version(version) if isinstance(version, str) else version
    co = problem.coefficients
    demand = problem.data.effective_demand
    T = problem.horizon.periods
    best = None
    for tp in range(max(t, 1), min(T, t + spec.lifetime_at(t) - 1) + 1):
        gamma = co.generation(spec, ver, t, tp, n)
        pos = gamma > 0
        if np.any(pos):
            r = float(np.max(demand[tp][pos] / gamma[pos]))
            best = r if best is None else max(best, r)
    if best is None:
        if fallback is None:
            raise BigMError(
                f"{spec.name}/{ver.name} installed at t={t}, node {n}: no positive output in its service window"
            )
        return int(fallback)
    return _ceil(best)


# -- model size ----------------------------------------------------------------


@dataclass(frozen=True)
class ModelSize:
    rows: int
    continuous: int
    integer: int
    rows_by_family: dict = field(default_factory=dict)
    cols_by_kind: dict = field(default_factory=dict)

    @property
    def columns(self) -> int:
        return self.continuous + self.integer


def count_model(tree: ScenarioTree, techs: Sequence[TechnologySpec], data: InstanceData, cap_rows: bool = True) -> ModelSize:
    """Row and column counts of :func:`build` from structure alone.

    No coefficients, profiles or matrices are evaluated.
    """
    Q = tree.horizon.subperiods_per_period
    root = tree.root_id
    np_all = list(node_periods(tree))
    np_ops = [(n, t) for n, t in np_all if n != root]

    cols = {k: 0 for k in VAR_KINDS}
    integer = 0
    caps = 0
    balance = 0
    for spec in techs:
        n_ver = len(spec.versions)
        n_cohort = sum(1 for _ in cohorts(tree, spec))
        cols["vplus"] += n_ver * len(np_all)
        cols["vminus"] += n_ver * n_cohort
        cols["v"] += n_ver * n_cohort
        balance += n_ver * n_cohort
        if spec.is_generation:
            integer += n_ver * (len(np_all) + n_cohort)
            caps += n_ver * (len(np_all) + n_cohort)
    for kind in ("c", "zplus", "zminus", "g"):
        cols[kind] = Q * len(np_all)

    rows = {
        "demand": Q * len(np_ops),
        "balance": balance,
        "storage": Q * len(np_ops),
        "capacity": Q * len(np_all),
        "emission": sum(1 for _, t in np_ops if math.isfinite(data.emission_cap[t])),
        "budget": sum(1 for _, t in np_all if math.isfinite(data.budget[t])),
        "spatial": sum(1 for _, t in np_all if math.isfinite(data.area_cap[t])),
        "vplus_cap": 0,
        "vminus_cap": 0,
    }
    if cap_rows:
        gen_versions = sum(len(s.versions) for s in techs if s.is_generation)
        rows["vplus_cap"] = gen_versions * len(np_all)
        rows["vminus_cap"] = caps - rows["vplus_cap"]
    total_cols = sum(cols.values())
    return ModelSize(sum(rows.values()), total_cols - integer, integer, rows, cols)


# -- builder ----------------------------------------------------------------


class _Rows:
    def __init__(self):
        self.r: list[np.ndarray] = []
        self.c: list[np.ndarray] = []
        self.v: list[np.ndarray] = []
        self.names: list[str] = []
        self.sense: list[str] = []
        self.rhs: list[float] = []
        self.family_of: list[str] = []

    def add(self, name: str, family: str, cols, vals, sense: str, rhs: float) -> int:
        i = len(self.names)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        keep = vals != 0
        self.r.append(np.full(int(keep.sum()), i, dtype=np.int64))
        self.c.append(cols[keep])
        self.v.append(vals[keep])
        self.names.append(name)
        self.family_of.append(family)
        self.sense.append(sense)
        self.rhs.append(float(rhs))
        return i

    def add_block(self, names, family, entries, sense, rhs) -> None:
        """Add ``len(names)`` rows at once; ``entries`` holds (local_row, col, val) arrays."""
        base = len(self.names)
        lr, cols, vals = (np.concatenate(e) if e else np.zeros(0) for e in entries)
        keep = vals != 0
        self.r.append(lr[keep].astype(np.int64) + base)
        self.c.append(cols[keep].astype(np.int64))
        self.v.append(vals[keep])
        self.names.extend(names)
        self.family_of.extend([family] * len(names))
        self.sense.extend([sense] * len(names))
        self.rhs.extend(np.broadcast_to(np.asarray(rhs, dtype=float), (len(names),)).tolist())


@dataclass
class BuildResult:
    model: MilpModel
    catalog: VarCatalog
    row_family: list[str]
    big_m: dict

    def __iter__(self):
        return iter((self.model, self.catalog))


def build(
    problem: Problem,
    m_scale: float = 1.0,
    cap_rows: bool = True,
    m_fallback: int | None = None,
) -> BuildResult:
    """Assemble the MILP for ``problem``.

    Parameters
    ----------
    problem : Problem
        Tree, technologies and instance data.
    m_scale : float
        Multiplier applied to every installation cap before rounding up.
    cap_rows : bool
        Emit the caps as explicit rows in addition to column bounds.
    m_fallback : int, optional
        Cap used when a cohort has no positive output in its window;
        without it such cohorts raise :class:`BigMError`.

    Returns
    -------
    BuildResult
        Unpacks as ``model, catalog``; also exposes the row families and the
        installation caps keyed by ``(tech, version, t, n)``.
    """
    tree = problem.tree
    data = problem.data
    co = problem.coefficients
    h = tree.horizon
    Q = h.subperiods_per_period
    root = tree.root_id
    beta = data.discount_factor
    demand = data.effective_demand
    eta_in, eta_out = problem.storage_efficiency
    cat = VarCatalog()
    obj: list[float] = []
    lb: list[float] = []
    ub: list[float] = []
    integer: list[bool] = []

    def col(key: VarKey, cost: float, lo: float, hi: float, is_int: bool) -> int:
        idx = cat.add(key)
        obj.append(cost)
        lb.append(lo)
        ub.append(hi)
        integer.append(is_int)
        return idx

    # installation caps
    caps: dict[tuple, int] = {}
    for spec in problem.generation_techs:
        for ver in spec.versions:
            for n, t in node_periods(tree):
                if n == root:
                    try:
                        m = big_m(problem, spec, ver, t, n, m_fallback)
                    except BigMError:
                        m = 0
                    m = max(_ceil(m * m_scale), int(math.ceil(data.fleet(spec.name, ver.name))))
                else:
                    m = _ceil(big_m(problem, spec, ver, t, n, m_fallback) * m_scale)
                caps[(spec.name, ver.name, t, n)] = m

    # -- columns
    for spec in problem.techs:
        gen = spec.is_generation
        for ver in spec.versions:
            for n, t in node_periods(tree):
                pi = tree.prob(n)
                cost = 0.0 if n == root else pi * beta ** (t - 1) * co.install_cost(spec, ver, t, n)
                if n == root:
                    iota = data.fleet(spec.name, ver.name)
                    lo = hi = iota
                else:
                    lo, hi = 0.0, (caps[(spec.name, ver.name, t, n)] if gen else math.inf)
                col(VarKey("vplus", spec.name, ver.name, t, None, None, n), cost, lo, hi, gen)
            for t, tp, n in cohorts(tree, spec):
                pi = tree.prob(n)
                cost = 0.0 if n == root else -pi * beta ** (tp - 1) * co.salvage_value(spec, ver, t, tp, n)
                hi = caps[(spec.name, ver.name, t, tree.ancestor(n, t))] if gen else math.inf
                col(VarKey("vminus", spec.name, ver.name, t, tp, None, n), cost, 0.0, hi, gen)
            for t, tp, n in cohorts(tree, spec):
                pi = tree.prob(n)
                cost = 0.0 if n == root else pi * beta ** (tp - 1) * co.om_cost(spec, ver, t, tp, n)
                col(VarKey("v", spec.name, ver.name, t, tp, None, n), cost, 0.0, math.inf, False)
    for n, t in node_periods(tree):
        hi = 0.0 if n == root else math.inf
        for kind in ("c", "zplus", "zminus", "g"):
            for q in range(Q):
                cost = 0.0
                if kind == "g" and n != root:
                    cost = tree.prob(n) * beta ** (t - 1) * data.tariff[t]
                col(VarKey(kind, t=t, q=q, n=n), cost, 0.0, hi, False)

    rows = _Rows()
    qs = np.arange(Q)

    # -- demand
    for n, t in node_periods(tree):
        if n == root:
            continue
        lr, cc, vv = [], [], []
        for kind, sign in (("g", 1.0), ("zplus", -1.0), ("zminus", 1.0)):
            lr.append(qs)
            cc.append(cat.ops(kind, t, n, Q))
            vv.append(np.full(Q, sign))
        for spec in problem.generation_techs:
            for ver in spec.versions:
                for t0 in range(t + 1):
                    if not spec.operational(t0, t):
                        continue
                    j = cat[VarKey("v", spec.name, ver.name, t0, t, None, n)]
                    lr.append(qs)
                    cc.append(np.full(Q, j))
                    vv.append(co.generation(spec, ver, t0, t, n))
        names = [f"demand[n={n},t={t},q={q}]" for q in range(Q)]
        rows.add_block(names, "demand", (lr, cc, vv), "G", demand[t])

    # -- cohort balance
    for spec in problem.techs:
        for ver in spec.versions:
            for t0, tp, n in cohorts(tree, spec):
                cols_ = [cat[VarKey("v", spec.name, ver.name, t0, tp, None, n)]]
                vals = [1.0]
                cols_.append(cat[VarKey("vplus", spec.name, ver.name, t0, None, None, tree.ancestor(n, t0))])
                vals.append(-1.0)
                for t2 in range(t0, tp + 1):
                    cols_.append(cat[VarKey("vminus", spec.name, ver.name, t0, t2, None, tree.ancestor(n, t2))])
                    vals.append(1.0)
                rows.add(
                    f"balance[{spec.name},{ver.name},t={t0},tp={tp},n={n}]", "balance", cols_, vals, "E", 0.0
                )

    # -- storage state of charge
    for n, t in node_periods(tree):
        if n == root:
            continue
        c_now = cat.ops("c", t, n, Q)
        lr = [qs, qs, qs]
        cc = [c_now, cat.ops("zplus", t, n, Q), cat.ops("zminus", t, n, Q)]
        vv = [np.ones(Q), np.full(Q, -eta_in), np.full(Q, 1.0 / eta_out)]
        if Q > 1:
            lr.append(qs[1:])
            cc.append(c_now[:-1])
            vv.append(np.full(Q - 1, -1.0))
        prev = predecessor(tree, 0, t, n)
        if prev != HORIZON_START:
            lr.append(np.zeros(1, dtype=np.int64))
            cc.append(np.array([cat[VarKey("c", t=prev.t, q=prev.q, n=prev.n)]]))
            vv.append(np.array([-1.0]))
        names = [f"storage[n={n},t={t},q={q}]" for q in range(Q)]
        rows.add_block(names, "storage", (lr, cc, vv), "E", 0.0)

    # -- storage capacity
    for n, t in node_periods(tree):
        lr, cc, vv = [qs], [cat.ops("c", t, n, Q)], [np.ones(Q)]
        for spec in problem.storage_techs:
            for ver in spec.versions:
                for t0 in range(t + 1):
                    if not spec.operational(t0, t):
                        continue
                    j = cat[VarKey("v", spec.name, ver.name, t0, t, None, n)]
                    lr.append(qs)
                    cc.append(np.full(Q, j))
                    vv.append(np.full(Q, -co.storage_capacity(spec, ver, t0, t, n)))
        names = [f"capacity[n={n},t={t},q={q}]" for q in range(Q)]
        rows.add_block(names, "capacity", (lr, cc, vv), "L", 0.0)

    # -- emission
    for n, t in node_periods(tree):
        if n == root or not math.isfinite(data.emission_cap[t]):
            continue
        rows.add(
            f"emission[n={n},t={t}]",
            "emission",
            cat.ops("g", t, n, Q),
            np.full(Q, data.emission_factor[t]),
            "L",
            data.emission_cap[t],
        )

    # -- budget
    for n, t in node_periods(tree):
        if not math.isfinite(data.budget[t]):
            continue
        cols_, vals = [], []
        for spec in problem.techs:
            for ver in spec.versions:
                cols_.append(cat[VarKey("vplus", spec.name, ver.name, t, None, None, n)])
                vals.append(co.install_cost(spec, ver, t, n))
        rows.add(f"budget[n={n},t={t}]", "budget", cols_, vals, "L", budget_rhs(problem, t, n))

    # -- spatial
    for n, tp in node_periods(tree):
        if not math.isfinite(data.area_cap[tp]):
            continue
        cols_, vals = [], []
        for spec in problem.techs:
            for ver in spec.versions:
                for t0 in range(tp + 1):
                    if spec.operational(t0, tp):
                        cols_.append(cat[VarKey("v", spec.name, ver.name, t0, tp, None, n)])
                        vals.append(co.spatial(spec, ver, t0, n))
        rows.add(f"spatial[n={n},t={tp}]", "spatial", cols_, vals, "L", data.area_cap[tp])

    # -- explicit installation caps
    if cap_rows:
        for spec in problem.generation_techs:
            for ver in spec.versions:
                for n, t in node_periods(tree):
                    j = cat[VarKey("vplus", spec.name, ver.name, t, None, None, n)]
                    rows.add(
                        f"vplus_cap[{spec.name},{ver.name},t={t},n={n}]",
                        "vplus_cap",
                        [j],
                        [1.0],
                        "L",
                        caps[(spec.name, ver.name, t, n)],
                    )
        for spec in problem.generation_techs:
            for ver in spec.versions:
                for t0, tp, n in cohorts(tree, spec):
                    j = cat[VarKey("vminus", spec.name, ver.name, t0, tp, None, n)]
                    rows.add(
                        f"vminus_cap[{spec.name},{ver.name},t={t0},tp={tp},n={n}]",
                        "vminus_cap",
                        [j],
                        [1.0],
                        "L",
                        caps[(spec.name, ver.name, t0, tree.ancestor(n, t0))],
                    )

    m = len(rows.names)
    A = sp.coo_matrix(
        (
            np.concatenate(rows.v) if rows.v else np.zeros(0),
            (
                np.concatenate(rows.r) if rows.r else np.zeros(0, dtype=np.int64),
                np.concatenate(rows.c) if rows.c else np.zeros(0, dtype=np.int64),
            ),
        ),
        shape=(m, len(cat)),
    ).tocsr()
    model = MilpModel(
        A=A,
        sense=np.array(rows.sense, dtype="<U1"),
        rhs=np.array(rows.rhs, dtype=float),
        c=np.array(obj, dtype=float),
        lb=np.array(lb, dtype=float),
        ub=np.array(ub, dtype=float),
        integer=np.array(integer, dtype=bool),
        row_names=rows.names,
        col_names=cat.names,
    )
    return BuildResult(model, cat, rows.family_of, caps)


# -- canonical serialization --------------------------------------------------------


def _num(x: float) -> str:
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    return format(float(x) + 0.0, ".17g")


def canonical_dump(model: MilpModel) -> str:
    """Order-independent text form: every entity keyed and sorted by name."""
    lines = [f"sense min"]
    cols = model.col_names
    for j in sorted(range(model.n_cols), key=lambda j: cols[j]):
        lines.append(
            f"col {cols[j]} obj={_num(model.c[j])} lb={_num(model.lb[j])} "
            f"ub={_num(model.ub[j])} int={int(model.integer[j])}"
        )
    A = model.A.tocsr()
    for i in sorted(range(model.n_rows), key=lambda i: model.row_names[i]):
        lines.append(f"row {model.row_names[i]} {model.sense[i]} {_num(model.rhs[i])}")
        start, stop = A.indptr[i], A.indptr[i + 1]
        entries = sorted((cols[A.indices[k]], A.data[k]) for k in range(start, stop) if A.data[k] != 0)
        for name, val in entries:
            lines.append(f"  {name} {_num(val)}")
    return "\n".join(lines) + "\n"


# -- sensitivity cases --------------------------------------------------------


CASE_KINDS = ("relaxed_budget", "relaxed_emission", "safety_margin", "price_scale", "aggregation", "none")


@dataclass(frozen=True)
class Case:
    kind: str
    value: float = 0.0
    tech: str | None = None

    def __post_init__(self):
        if self.kind not in CASE_KINDS:
            raise ValueError(f"unknown case {self.kind!r}; expected one of {CASE_KINDS}")

    @classmethod
    def parse(cls, text: str) -> Case:
        """Parse ``kind=value`` or ``price_scale=tech:factor``."""
        if text in ("none", "base"):
            return cls("none")
        if "=" not in text:
            raise ValueError(f"case must look like kind=value, got {text!r}")
        kind, raw = text.split("=", 1)
        kind = kind.strip()
        if kind == "price_scale":
            if ":" not in raw:
                raise ValueError("price_scale expects tech:factor")
            tech, factor = raw.split(":", 1)
            return cls(kind, float(factor), tech.strip())
        return cls(kind, float(raw))

    @property
    def key(self) -> str:
        if self.kind == "none":
            return "base"
        if self.kind == "price_scale":
            return f"price_scale={self.tech}:{self.value:g}"
        return f"{self.kind}={self.value:g}"


def apply_case(problem: Problem, case: Case | str) -> Problem:
    """Return a modified problem for one sensitivity case."""
    if isinstance(case, str):
        case = Case.parse(case)
    data = problem.data
    if case.kind == "none":
        return problem
    if case.kind == "relaxed_budget":
        if case.value < 0:
            raise ValueError("budget must be nonnegative")
        budget = data.budget.copy()
        budget[1:] = case.value
        return problem.replace(data=dataclasses.replace(data, budget=budget))
    if case.kind == "relaxed_emission":
        if case.value < 0:
            raise ValueError("emission fraction must be nonnegative")
        T = data.periods
        cap = data.emission_cap.copy()
        cap[T] = case.value * data.emission_factor[T] * float(data.demand[T].sum())
        return problem.replace(data=dataclasses.replace(data, emission_cap=cap))
    if case.kind == "safety_margin":
        if case.value < 0:
            raise ValueError("safety margin must be nonnegative")
        return problem.replace(data=dataclasses.replace(data, safety_margin=case.value))
    if case.kind == "price_scale":
        if not case.value > 0:
            raise ValueError("price factor must be positive")
        problem.tech(case.tech)
        techs = []
        for spec in problem.techs:
            if spec.name == case.tech:
                versions = tuple(
                    dataclasses.replace(v, install_cost=v.install_cost * case.value) for v in spec.versions
                )
                spec = dataclasses.replace(spec, versions=versions)
            techs.append(spec)
        return problem.replace(techs=tuple(techs))
    if case.kind == "aggregation":
        return aggregate_problem(problem, int(case.value))
    raise ValueError(f"unknown case {case.kind!r}")


def aggregate_problem(problem: Problem, block: int) -> Problem:
    """Coarser sub-periods: demand and profiles summed over ``block`` steps."""
    h = problem.horizon
    if int(block) != block or block < 1 or h.subperiods_per_period % block:
        raise ValueError(f"block {block} does not divide {h.subperiods_per_period} sub-periods")
    if block == 1:
        return problem
    horizon = Horizon(
        h.stages,
        h.periods_per_stage,
        h.subperiods_per_period // block,
        h.subperiod_hours * block,
    )
    techs = []
    for spec in problem.techs:
        versions = tuple(
            dataclasses.replace(v, profile=aggregate(v.profile, block)) if v.profile is not None else v
            for v in spec.versions
        )
        techs.append(dataclasses.replace(spec, versions=versions))
    data = dataclasses.replace(problem.data, demand=aggregate(problem.data.demand, block))
    return Problem(problem.tree.with_horizon(horizon), tuple(techs), data, problem.degradation)
