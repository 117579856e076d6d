"""Core value types: time structure, scenario tree, technologies, instance data.

Period 0 belongs to the stage-0 root node and carries only the pre-existing
fleet. Decision stage ``s >= 1`` owns periods ``(s-1)*P + 1 .. s*P``.
Sub-periods are indexed ``0 .. Q-1`` inside every period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np

GENERATION = "generation"
STORAGE = "storage"

PROB_TOL = 1e-9


class DomainError(ValueError):
    """Invalid domain value or inconsistent structure."""


class NodeNotFound(KeyError):
    pass


@dataclass(frozen=True)
class Horizon:
    stages: int
    periods_per_stage: int
    subperiods_per_period: int
    subperiod_hours: float = 1.0

    def __post_init__(self):
        for name in ("stages", "periods_per_stage", "subperiods_per_period"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise DomainError(f"{name} must be an integer >= 1, got {value!r}")
        if not self.subperiod_hours > 0:
            raise DomainError("subperiod_hours must be positive")

    @property
    def periods(self) -> int:
        """Number of operational periods T (period 0 excluded)."""
        return self.stages * self.periods_per_stage

    @property
    def hours_per_period(self) -> float:
        return self.subperiods_per_period * self.subperiod_hours

    def stage_periods(self, stage: int) -> range:
        if stage == 0:
            return range(0, 1)
        if not 1 <= stage <= self.stages:
            raise DomainError(f"stage {stage} outside 0..{self.stages}")
        first = (stage - 1) * self.periods_per_stage + 1
        return range(first, first + self.periods_per_stage)

    def stage_of_period(self, t: int) -> int:
        if t == 0:
            return 0
        if not 1 <= t <= self.periods:
            raise DomainError(f"period {t} outside 0..{self.periods}")
        return (t - 1) // self.periods_per_stage + 1


@dataclass(frozen=True)
class TechState:
    """Cumulative cost and efficiency multipliers relative to the baseline."""

    cost: float = 1.0
    efficiency: float = 1.0


@dataclass(frozen=True)
class ScenarioNode:
    id: int
    stage: int
    parent: int | None
    probability: float
    periods: range
    state: Mapping[str, TechState] = field(default_factory=dict)
    # branch label per technology on the edge entering this node
    labels: Mapping[str, str] = field(default_factory=dict)


class SubperiodRef(NamedTuple):
    q: int
    t: int
    n: int


# Predecessor of the first operational sub-period; stored energy there is 0.
HORIZON_START = SubperiodRef(-1, -1, -1)


class ScenarioTree:
    """Immutable node-indexed scenario tree over a :class:`Horizon`.

    Node ids are arbitrary integers; the root is the unique node without a
    parent and sits at stage 0 owning period 0. ``label_techs`` lists the
    technologies whose branch letters make up path labels.
    """

    def __init__(
        self,
        nodes: Sequence[ScenarioNode],
        horizon: Horizon,
        label_techs: Sequence[str] | None = None,
    ):
        self.horizon = horizon
        if label_techs is None:
            label_techs = sorted({k for node in nodes for k, v in node.labels.items() if v})
        self.label_techs = tuple(label_techs)
        self._nodes = {node.id: node for node in nodes}
        if len(self._nodes) != len(nodes):
            raise DomainError("duplicate node ids")
        roots = [node.id for node in nodes if node.parent is None]
        if len(roots) != 1:
            raise DomainError(f"expected exactly one root, found {len(roots)}")
        self.root_id = roots[0]
        children: dict[int, list[int]] = {node.id: [] for node in nodes}
        for node in nodes:
            if node.parent is not None:
                if node.parent not in self._nodes:
                    raise DomainError(f"node {node.id} has unknown parent {node.parent}")
                children[node.parent].append(node.id)
        self._children = {k: tuple(v) for k, v in children.items()}
        self.order = tuple(node.id for node in nodes)
        self._validate()

    def _validate(self) -> None:
        h = self.horizon
        root = self._nodes[self.root_id]
        if root.stage != 0 or root.periods != range(0, 1):
            raise DomainError("root must be stage 0 owning period 0 only")
        if abs(root.probability - 1.0) > PROB_TOL:
            raise DomainError("root probability must be 1")
        stage_mass: dict[int, float] = {}
        for node in self._nodes.values():
            if node.parent is not None:
                parent = self._nodes[node.parent]
                if node.stage != parent.stage + 1:
                    raise DomainError(f"node {node.id} stage does not follow its parent")
            if node.stage > h.stages:
                raise DomainError(f"node {node.id} beyond the last stage")
            if node.periods != h.stage_periods(node.stage):
                raise DomainError(
                    f"node {node.id} periods {node.periods} differ from stage {node.stage} "
                    f"periods {h.stage_periods(node.stage)}"
                )
            if node.probability < 0:
                raise DomainError(f"node {node.id} has negative probability")
            stage_mass[node.stage] = stage_mass.get(node.stage, 0.0) + node.probability
            kids = self._children[node.id]
            if kids:
                mass = sum(self._nodes[k].probability for k in kids)
                if abs(mass - node.probability) > PROB_TOL:
                    raise DomainError(f"children of node {node.id} carry mass {mass}")
            elif node.stage != h.stages:
                raise DomainError(f"leaf {node.id} ends before the last stage")
        for stage in range(h.stages + 1):
            if abs(stage_mass.get(stage, 0.0) - 1.0) > PROB_TOL:
                raise DomainError(f"stage {stage} probabilities sum to {stage_mass.get(stage)}")

    # -- lookup -----------------------------------------------------------
    def __len__(self) -> int:
        return len(self._nodes)

    def __iter__(self) -> Iterator[ScenarioNode]:
        return (self._nodes[i] for i in self.order)

    def __contains__(self, n: int) -> bool:
        return n in self._nodes

    def node(self, n: int) -> ScenarioNode:
        try:
            return self._nodes[n]
        except KeyError:
            raise NodeNotFound(n) from None

    @property
    def root(self) -> ScenarioNode:
        return self._nodes[self.root_id]

    def children(self, n: int) -> tuple[int, ...]:
        self.node(n)
        return self._children[n]

    def parent(self, n: int) -> int | None:
        return self.node(n).parent

    def prob(self, n: int) -> float:
        return self.node(n).probability

    def stage_of(self, n: int) -> int:
        return self.node(n).stage

    def periods_of(self, n: int) -> range:
        return self.node(n).periods

    def stage_nodes(self, stage: int) -> list[int]:
        return [i for i in self.order if self._nodes[i].stage == stage]

    def leaves(self) -> list[int]:
        return [i for i in self.order if not self._children[i]]

    def descendants(self, n: int) -> list[int]:
        """``n`` followed by every node below it, breadth first."""
        out = [n]
        k = 0
        while k < len(out):
            out.extend(self.children(out[k]))
            k += 1
        return out

    def ancestor_path(self, n: int) -> list[int]:
        path = [self.node(n).id]
        while self._nodes[path[-1]].parent is not None:
            path.append(self._nodes[path[-1]].parent)
        return path[::-1]

    def ancestor(self, n: int, t: int) -> int:
        """Node on the root-to-``n`` path whose period range contains ``t``."""
        node = self.node(n)
        stage = self.horizon.stage_of_period(t)
        if stage > node.stage:
            raise DomainError(f"period {t} lies after node {n}")
        while node.stage > stage:
            node = self._nodes[node.parent]
        return node.id

    def with_horizon(self, horizon: Horizon) -> ScenarioTree:
        """Same node structure under a horizon with identical stage layout."""
        if (horizon.stages, horizon.periods_per_stage) != (
            self.horizon.stages,
            self.horizon.periods_per_stage,
        ):
            raise DomainError("stage/period layout must be unchanged")
        return ScenarioTree([self._nodes[i] for i in self.order], horizon, self.label_techs)


def ancestor_path(tree: ScenarioTree, n: int) -> list[int]:
    return tree.ancestor_path(n)


def predecessor(tree: ScenarioTree, q: int, t: int, n: int) -> SubperiodRef:
    """Sub-period immediately before ``(q, t, n)`` for storage carry-over.

    The first sub-period of period 1 (and anything inside the root's period 0)
    maps to :data:`HORIZON_START`.
    """
    node = tree.node(n)
    Q = tree.horizon.subperiods_per_period
    if t not in node.periods:
        raise DomainError(f"period {t} is not owned by node {n}")
    if not 0 <= q < Q:
        raise DomainError(f"sub-period {q} outside 0..{Q - 1}")
    if node.parent is None or (t == 1 and q == 0):
        return HORIZON_START
    if q > 0:
        return SubperiodRef(q - 1, t, n)
    if t > node.periods.start:
        return SubperiodRef(Q - 1, t - 1, n)
    return SubperiodRef(Q - 1, t - 1, node.parent)


# -- technologies ------------------------------------------------------------


@dataclass(frozen=True)
class Branch:
    cost_multiplier: float
    efficiency_multiplier: float
    probability: float
    label: str = ""

    def __post_init__(self):
        if not (self.cost_multiplier > 0 and self.efficiency_multiplier > 0):
            raise DomainError("branch multipliers must be positive")
        if not 0 <= self.probability <= 1:
            raise DomainError("branch probability must lie in [0, 1]")


@dataclass(frozen=True)
class VersionSpec:
    name: str
    rated_capacity: float
    install_cost: float
    spatial_requirement: float = 0.0
    profile: np.ndarray | None = field(default=None, compare=False, repr=False)
    charge_efficiency: float = 1.0
    discharge_efficiency: float = 1.0
    annual_generation: float | None = None

    def __post_init__(self):
        if not self.install_cost > 0:
            raise DomainError(f"version {self.name}: install cost must be positive")
        if self.spatial_requirement < 0:
            raise DomainError(f"version {self.name}: negative spatial requirement")
        for eff in (self.charge_efficiency, self.discharge_efficiency):
            if not 0 < eff <= 1:
                raise DomainError(f"version {self.name}: efficiencies must lie in (0, 1]")
        if self.profile is not None:
            prof = np.asarray(self.profile, dtype=float)
            if prof.ndim != 1 or np.any(prof < 0) or not np.all(np.isfinite(prof)):
                raise DomainError(f"version {self.name}: profile must be a finite nonnegative vector")
            object.__setattr__(self, "profile", prof)


@dataclass(frozen=True)
class TechnologySpec:
    name: str
    category: str
    versions: tuple[VersionSpec, ...]
    lifetime: int | tuple[int, ...] = 25
    degradation_rate: float = 0.0
    branches: tuple[Branch, ...] = (Branch(1.0, 1.0, 1.0),)
    # optional per-transition override; entry k applies between stages k+1 and k+2
    stage_branches: tuple[tuple[Branch, ...], ...] = ()
    om_cost: float = 0.0
    om_annual_multiplier: float = 1.0
    salvage_fraction: float = 0.2

    def __post_init__(self):
        if self.category not in (GENERATION, STORAGE):
            raise DomainError(f"{self.name}: category must be generation or storage")
        object.__setattr__(self, "versions", tuple(self.versions))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "stage_branches", tuple(tuple(b) for b in self.stage_branches))
        if not self.versions:
            raise DomainError(f"{self.name}: at least one version required")
        if len({v.name for v in self.versions}) != len(self.versions):
            raise DomainError(f"{self.name}: duplicate version names")
        if not 0 <= self.degradation_rate < 1:
            raise DomainError(f"{self.name}: degradation rate must lie in [0, 1)")
        if not self.om_annual_multiplier > 0:
            raise DomainError(f"{self.name}: O&M multiplier must be positive")
        lifetimes = self.lifetime if isinstance(self.lifetime, tuple) else (self.lifetime,)
        if any(int(x) != x or x < 1 for x in lifetimes):
            raise DomainError(f"{self.name}: lifetime must be an integer >= 1")
        for group in (self.branches, *self.stage_branches):
            if group and abs(sum(b.probability for b in group) - 1.0) > PROB_TOL:
                raise DomainError(f"{self.name}: branch probabilities must sum to 1")
        if self.category == STORAGE:
            etas = {(v.charge_efficiency, v.discharge_efficiency) for v in self.versions}
            if len(etas) > 1:
                raise DomainError(f"{self.name}: storage versions must share efficiencies")

    @property
    def is_generation(self) -> bool:
        return self.category == GENERATION

    def version(self, name: str) -> VersionSpec:
        for v in self.versions:
            if v.name == name:
                return v
        raise KeyError(f"{self.name} has no version {name!r}")

    def lifetime_at(self, t: int) -> int:
        """Economic lifetime of a unit installed in period ``t``."""
        if isinstance(self.lifetime, tuple):
            return int(self.lifetime[min(t, len(self.lifetime) - 1)])
        return int(self.lifetime)

    def operational(self, t: int, t_op: int) -> bool:
        return t <= t_op < t + self.lifetime_at(t)

    def branches_at(self, transition: int) -> tuple[Branch, ...]:
        if self.stage_branches:
            return self.stage_branches[min(transition, len(self.stage_branches) - 1)]
        return self.branches


# -- instance data -----------------------------------------------------------


class DiscountFactors(NamedTuple):
    real_rate: float
    factor: float


def compute_discount(nominal_rate: float, inflation: float) -> DiscountFactors:
    """Real discount rate and the matching annual discount factor."""
    if inflation == -1:
        raise ZeroDivisionError("inflation of -100% makes the real rate undefined")
    if nominal_rate <= -1 or inflation < -1:
        raise DomainError("rates must exceed -1")
    real = (1.0 + nominal_rate) / (1.0 + inflation) - 1.0
    return DiscountFactors(real, 1.0 / (1.0 + real))


def _per_period(values, size: int, name: str, fill: float | None = None) -> np.ndarray:
    if values is None:
        if fill is None:
            raise DomainError(f"{name} is required")
        return np.full(size, fill, dtype=float)
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return np.full(size, float(arr))
    if arr.shape != (size,):
        raise DomainError(f"{name} must have {size} entries (periods 0..T), got {arr.shape}")
    return arr


@dataclass(frozen=True)
class InstanceData:
    """Exogenous parameters, each indexed by period ``0..T``.

    ``demand`` has shape ``(T+1, Q)``; row 0 is ignored because the root
    owns no demand rows. Infinite caps mean "no constraint row".
    """

    demand: np.ndarray = field(repr=False)
    tariff: np.ndarray
    budget: np.ndarray
    emission_cap: np.ndarray
    emission_factor: np.ndarray
    area_cap: np.ndarray
    discount_factor: float = 0.97
    initial_fleet: Mapping[tuple[str, str], float] = field(default_factory=dict)
    safety_margin: float = 0.0

    def __post_init__(self):
        demand = np.asarray(self.demand, dtype=float)
        if demand.ndim != 2:
            raise DomainError("demand must be a (periods+1, subperiods) array")
        if np.any(demand < 0):
            raise DomainError("demand must be nonnegative")
        object.__setattr__(self, "demand", demand)
        size = demand.shape[0]
        for name in ("tariff", "budget", "emission_cap", "emission_factor", "area_cap"):
            object.__setattr__(self, name, _per_period(getattr(self, name), size, name))
        if not 0 < self.discount_factor <= 1:
            raise DomainError("discount factor must lie in (0, 1]")
        if np.any(self.budget < 0) or np.any(self.emission_cap < 0):
            raise DomainError("budgets and emission caps must be nonnegative")
        finite = self.area_cap[np.isfinite(self.area_cap)]
        if np.any(self.area_cap[1:] < self.area_cap[:-1]) or np.any(finite < 0):
            raise DomainError("area caps must be nonnegative and nondecreasing")
        if self.safety_margin < 0:
            raise DomainError("safety margin must be nonnegative")
        object.__setattr__(self, "initial_fleet", dict(self.initial_fleet))

    @classmethod
    def from_profile(
        cls,
        horizon: Horizon,
        demand_profile,
        *,
        tariff,
        budget,
        emission_cap=None,
        emission_factor=1.0,
        area_cap=None,
        **kwargs,
    ) -> InstanceData:
        """Repeat a single-period demand profile over every period.

        Per-period arguments accept a scalar or a length ``T+1`` sequence;
        missing caps default to +inf.
        """
        prof = np.asarray(demand_profile, dtype=float)
        T = horizon.periods
        if prof.shape == (horizon.subperiods_per_period,):
            demand = np.tile(prof, (T + 1, 1))
        elif prof.shape == (T + 1, horizon.subperiods_per_period):
            demand = prof
        else:
            raise DomainError(f"demand shape {prof.shape} does not match the horizon")
        demand = demand.copy()
        demand[0] = 0.0
        size = T + 1
        return cls(
            demand=demand,
            tariff=_per_period(tariff, size, "tariff"),
            budget=_per_period(budget, size, "budget"),
            emission_cap=_per_period(emission_cap, size, "emission_cap", math.inf),
            emission_factor=_per_period(emission_factor, size, "emission_factor"),
            area_cap=_per_period(area_cap, size, "area_cap", math.inf),
            **kwargs,
        )

    @property
    def periods(self) -> int:
        return self.demand.shape[0] - 1

    @property
    def effective_demand(self) -> np.ndarray:
        """Demand after the uniform safety margin."""
        return self.demand * (1.0 + self.safety_margin)

    def fleet(self, tech: str, version: str) -> float:
        return float(self.initial_fleet.get((tech, version), 0.0))
