"""Multi-stage stochastic capacity planning for campus electricity systems."""

from .domain import (
    Branch,
    Horizon,
    InstanceData,
    ScenarioNode,
    ScenarioTree,
    TechnologySpec,
    TechState,
    VersionSpec,
    ancestor_path,
    compute_discount,
    predecessor,
)
from .model import Case, MilpModel, Problem, VarCatalog, apply_case, build, count_model
from .scenario import build_scenario_tree, build_tech_tree, combine, scenario_paths

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "Case",
    "Horizon",
    "InstanceData",
    "MilpModel",
    "Problem",
    "ScenarioNode",
    "ScenarioTree",
    "TechState",
    "TechnologySpec",
    "VarCatalog",
    "VersionSpec",
    "ancestor_path",
    "apply_case",
    "build",
    "build_scenario_tree",
    "build_tech_tree",
    "combine",
    "compute_discount",
    "count_model",
    "predecessor",
    "scenario_paths",
]
