"""Shared fixtures: small hand-built problems and the committed configs."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

TESTS = Path(__file__).resolve().parent
ROOT = TESTS.parent
CONFIGS = ROOT / "configs"
DATA = ROOT / "data"

# oracles.py lives next to the tests and is imported as a plain module
if str(TESTS) not in sys.path:
    sys.path.insert(0, str(TESTS))

from campusplan.domain import GENERATION, STORAGE, Branch, Horizon, InstanceData, TechnologySpec, VersionSpec  # noqa: E402
from campusplan.model import Problem  # noqa: E402
from campusplan.scenario import build_scenario_tree  # noqa: E402


def small_problem(
    stages: int = 3,
    Q: int = 4,
    storage: bool = True,
    emission_final: float | None = 2.0,
    budget: float = 400.0,
    fleet: dict | None = None,
    tariff: float = 6.0,
) -> Problem:
    """Three-stage solar-plus-battery instance with a two-way solar split.

    Cheap to solve to optimality; used wherever a real optimum is needed.
    """
    h = Horizon(stages, 1, Q)
    shape = np.array([0.0, 0.8, 1.0, 0.3, 0.6, 0.9, 0.2, 0.0][:Q])
    solar = TechnologySpec(
        "solar",
        GENERATION,
        (
            VersionSpec("S1", 2.0, 40.0, spatial_requirement=1.0, profile=2.0 * shape),
            VersionSpec("S2", 5.0, 90.0, spatial_requirement=2.2, profile=5.0 * shape),
        ),
        lifetime=10,
        degradation_rate=0.01,
        branches=(Branch(0.9, 1.0, 0.5, "s"), Branch(0.7, 1.15, 0.5, "f")),
        om_cost=0.2,
    )
    techs = [solar]
    if storage:
        techs.append(
            TechnologySpec(
                "battery",
                STORAGE,
                (VersionSpec("B1", 1.0, 6.0, charge_efficiency=0.95, discharge_efficiency=0.95),),
                lifetime=10,
                om_cost=0.05,
            )
        )
    tree = build_scenario_tree(techs, h)
    T = h.periods
    demand = np.array([1.5, 2.0, 2.5, 2.0, 1.8, 2.2, 1.6, 1.4][:Q])
    emission = [np.inf] * (T + 1)
    if emission_final is not None:
        emission[T] = emission_final
    data = InstanceData.from_profile(
        h,
        demand,
        tariff=tariff,
        budget=[0.0] + [budget] * T,
        emission_cap=emission,
        discount_factor=0.97,
        initial_fleet=fleet or {},
    )
    return Problem(tree, tuple(techs), data)


@pytest.fixture
def problem() -> Problem:
    return small_problem()


@pytest.fixture(scope="session")
def solved_small():
    from campusplan.analysis import solve_problem

    return solve_problem(small_problem(), gap=0.0)
