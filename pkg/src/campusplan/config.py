"""JSON run configuration.

A root document names the horizon, the technologies and the instance data,
each either inline or as a path relative to the root document. The format
is described in ``docs/config.md``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .domain import (
    GENERATION,
    STORAGE,
    Branch,
    DomainError,
    Horizon,
    InstanceData,
    TechnologySpec,
    VersionSpec,
    compute_discount,
)
from .model import Problem
from .profiles import (
    DEGRADATION_MODES,
    capacity_factor_profile,
    load_demand_csv,
    load_profiles_csv,
    synthetic_shape,
)
from .scenario import build_scenario_tree
from .trendlab import fit_exponential, read_series


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; carries the offending file."""

    def __init__(self, message: str, source: str | Path | None = None):
        self.source = str(source) if source is not None else None
        super().__init__(f"{source}: {message}" if source else message)


@dataclass
class RunConfig:
    path: Path
    name: str
    problem: Problem
    seed: int = 0
    solver: dict = field(default_factory=dict)
    studies: dict = field(default_factory=dict)


# -- small helpers ---------------------------------------------------------------


def _read_json(path: Path) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError("file not found", path) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", path) from None


def _section(value, base: Path, what: str):
    """Inline value, or the parsed JSON file it names (with that file's directory)."""
    if isinstance(value, str):
        path = (base / value).resolve()
        return _read_json(path), path.parent, path
    if value is None:
        raise ConfigError(f"missing '{what}' section")
    return value, base, None


def _number(x, what: str) -> float:
    if x is None or x == "inf":
        return math.inf
    if x == "-inf":
        return -math.inf
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{what}: expected a number, got {x!r}")
    return float(x)


def periodic(value, horizon: Horizon, what: str, period0=None, default=None) -> np.ndarray:
    """Expand a per-period value form into an array of length ``T + 1``.

    Accepted forms: a number (every period), a list of ``T`` values
    (periods 1..T) or ``T + 1`` values, ``{"by_stage": [...]}`` with one
    value per non-root stage, and ``{"default": v, "periods": {"t": v}}``.
    Dictionary forms may also set ``"period0"``. When period 0 is not given,
    ``period0`` is used, falling back to the value of period 1.
    """
    T = horizon.periods
    out = np.full(T + 1, np.nan)
    p0 = period0
    if value is None:
        if default is None:
            raise ConfigError(f"{what}: value required")
        value = default
    if isinstance(value, dict):
        unknown = set(value) - {"by_stage", "default", "periods", "period0"}
        if unknown:
            raise ConfigError(f"{what}: unknown keys {sorted(unknown)}")
        if "by_stage" in value:
            stages = value["by_stage"]
            if len(stages) != horizon.stages:
                raise ConfigError(f"{what}: by_stage needs {horizon.stages} values, got {len(stages)}")
            for s, v in enumerate(stages, start=1):
                for t in horizon.stage_periods(s):
                    out[t] = _number(v, what)
        elif "default" in value:
            out[1:] = _number(value["default"], what)
        else:
            raise ConfigError(f"{what}: dictionary form needs 'by_stage' or 'default'")
        for key, v in value.get("periods", {}).items():
            t = int(key)
            if not 0 <= t <= T:
                raise ConfigError(f"{what}: period {t} outside 0..{T}")
            out[t] = _number(v, what)
            if t == 0:
                p0 = out[0]
        if "period0" in value:
            p0 = _number(value["period0"], what)
    elif isinstance(value, list):
        vals = [_number(v, what) for v in value]
        if len(vals) == T:
            out[1:] = vals
        elif len(vals) == T + 1:
            out[:] = vals
            p0 = vals[0]
        else:
            raise ConfigError(f"{what}: expected {T} or {T + 1} values, got {len(vals)}")
    else:
        out[1:] = _number(value, what)
    if p0 is not None:
        out[0] = p0
    elif np.isnan(out[0]):
        out[0] = out[1] if T else 0.0
    return out


# -- sections ----------------------------------------------------------------


def parse_horizon(doc: dict) -> Horizon:
    try:
        return Horizon(
            int(doc["stages"]),
            int(doc["periods_per_stage"]),
            int(doc["subperiods_per_period"]),
            float(doc.get("subperiod_hours", 1.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"horizon: missing {exc.args[0]!r}") from None
    except DomainError as exc:
        raise ConfigError(f"horizon: {exc}") from None


def _branch(doc: dict, what: str) -> Branch:
    try:
        return Branch(
            float(doc["cost_multiplier"]),
            float(doc["efficiency_multiplier"]),
            float(doc["probability"]),
            str(doc.get("label", "")),
        )
    except KeyError as exc:
        raise ConfigError(f"{what}: branch missing {exc.args[0]!r}") from None


def load_branch_file(path: Path) -> tuple[Branch, ...]:
    """Branches from a cluster report (``{"branches": [...]}``) or a bare list."""
    doc = _read_json(path)
    items = doc.get("branches") if isinstance(doc, dict) else doc
    if not isinstance(items, list) or not items:
        raise ConfigError("expected a non-empty 'branches' list", path)
    return tuple(_branch(b, str(path)) for b in items)


def _branches(value, base: Path, what: str) -> tuple[Branch, ...]:
    if value is None:
        return (Branch(1.0, 1.0, 1.0),)
    if isinstance(value, dict) and "file" in value:
        return load_branch_file((base / value["file"]).resolve())
    if isinstance(value, list) and value:
        return tuple(_branch(b, what) for b in value)
    raise ConfigError(f"{what}: branches must be a list or {{'file': ...}}")


def _om(value, base: Path, what: str) -> tuple[float, float]:
    if value is None:
        return 0.0, 1.0
    if isinstance(value, (int, float)):
        return float(value), 1.0
    if "series" in value:
        try:
            series = read_series((base / value["series"]).resolve())
            return fit_exponential(series, value.get("reference_year"))
        except DomainError as exc:
            raise ConfigError(f"{what}: {exc}") from None
    return float(value.get("base", 0.0)), float(value.get("annual_multiplier", 1.0))


def _profile(value, version: dict, horizon: Horizon, columns: dict, seed: int, what: str):
    if value is None:
        return None
    Q = horizon.subperiods_per_period
    if isinstance(value, list):
        arr = np.asarray(value, dtype=float)
        if arr.shape != (Q,):
            raise ConfigError(f"{what}: profile needs {Q} values, got {arr.size}")
        return arr
    if "column" in value:
        name = value["column"]
        if name not in columns:
            raise ConfigError(f"{what}: profile column {name!r} not in the profile file")
        return columns[name]
    if "synthetic" in value:
        shape = synthetic_shape(value["synthetic"], Q, horizon.subperiod_hours, int(value.get("seed", seed)))
        if "annual_kwh" in value:
            return shape / shape.sum() * float(value["annual_kwh"])
        if "capacity_factor" in value:
            return capacity_factor_profile(
                shape, float(version["rated_capacity"]), float(value["capacity_factor"]), horizon.hours_per_period
            )
        raise ConfigError(f"{what}: synthetic profile needs 'annual_kwh' or 'capacity_factor'")
    raise ConfigError(f"{what}: unrecognised profile form")


def parse_technologies(items: list, base: Path, horizon: Horizon, seed: int = 0) -> tuple[TechnologySpec, ...]:
    if not isinstance(items, list) or not items:
        raise ConfigError("technologies: expected a non-empty list")
    techs = []
    for i, doc in enumerate(items):
        name = doc.get("name", f"#{i}")
        what = f"technology {name}"
        category = doc.get("category", GENERATION)
        if category not in (GENERATION, STORAGE):
            raise ConfigError(f"{what}: category must be {GENERATION!r} or {STORAGE!r}")
        columns = {}
        if "profile_file" in doc:
            try:
                columns = load_profiles_csv((base / doc["profile_file"]).resolve(), horizon)
            except (DomainError, OSError) as exc:
                raise ConfigError(f"{what}: {exc}") from None
        versions = []
        for k, v in enumerate(doc.get("versions", [])):
            vwhat = f"{what} version {v.get('name', k)}"
            try:
                versions.append(
                    VersionSpec(
                        str(v["name"]),
                        float(v["rated_capacity"]),
                        float(v["install_cost"]),
                        spatial_requirement=float(v.get("spatial_requirement", 0.0)),
                        profile=_profile(v.get("profile"), v, horizon, columns, seed + 7919 * i + k, vwhat),
                        charge_efficiency=float(v.get("charge_efficiency", 1.0)),
                        discharge_efficiency=float(v.get("discharge_efficiency", 1.0)),
                        annual_generation=v.get("annual_generation"),
                    )
                )
            except KeyError as exc:
                raise ConfigError(f"{vwhat}: missing {exc.args[0]!r}") from None
            except DomainError as exc:
                raise ConfigError(f"{vwhat}: {exc}") from None
        om_base, om_mult = _om(doc.get("om"), base, what)
        lifetime = doc.get("lifetime", 25)
        try:
            techs.append(
                TechnologySpec(
                    str(name),
                    category,
                    tuple(versions),
                    lifetime=tuple(int(x) for x in lifetime) if isinstance(lifetime, list) else int(lifetime),
                    degradation_rate=float(doc.get("degradation_rate", 0.0)),
                    branches=_branches(doc.get("branches"), base, what),
                    stage_branches=tuple(
                        _branches(g, base, what) for g in doc.get("stage_branches", [])
                    ),
                    om_cost=om_base,
                    om_annual_multiplier=om_mult,
                    salvage_fraction=float(doc.get("salvage_fraction", 0.2)),
                )
            )
        except DomainError as exc:
            raise ConfigError(f"{what}: {exc}") from None
    return tuple(techs)


def parse_instance(doc: dict, base: Path, horizon: Horizon, seed: int = 0) -> InstanceData:
    T, Q = horizon.periods, horizon.subperiods_per_period
    dem = doc.get("demand")
    if dem is None:
        raise ConfigError("instance: missing 'demand'")
    try:
        if isinstance(dem, list):
            profile = np.asarray(dem, dtype=float)
            dem = {}
        elif "file" in dem:
            profile = load_demand_csv((base / dem["file"]).resolve(), horizon)
        elif "profile" in dem:
            profile = np.asarray(dem["profile"], dtype=float)
        elif "synthetic" in dem:
            shape = synthetic_shape(dem["synthetic"], Q, horizon.subperiod_hours, int(dem.get("seed", seed)))
            profile = shape / shape.sum() * float(dem["annual_kwh"])
        else:
            raise ConfigError("instance: demand needs a list, 'file', 'profile' or 'synthetic'")
    except (DomainError, OSError, KeyError) as exc:
        raise ConfigError(f"instance demand: {exc}") from None
    if profile.shape != (Q,):
        raise ConfigError(f"instance: demand has {profile.size} sub-periods, horizon has {Q}")
    growth = periodic(dem.get("scale", 1.0), horizon, "demand scale")
    demand = np.outer(growth, profile)
    demand[0] = 0.0  # the root period has no operations

    disc = doc.get("discount_factor", 0.97)
    if isinstance(disc, dict):
        try:
            disc = compute_discount(float(disc["nominal_rate"]), float(disc["inflation"])).factor
        except (KeyError, ZeroDivisionError) as exc:
            raise ConfigError(f"instance: discount needs nominal_rate and inflation ({exc})") from None
    fleet = {}
    for item in doc.get("initial_fleet", []):
        fleet[(str(item["tech"]), str(item["version"]))] = float(item["count"])
    try:
        return InstanceData(
            demand=demand,
            tariff=periodic(doc.get("tariff"), horizon, "tariff"),
            budget=periodic(doc.get("budget"), horizon, "budget", period0=0.0),
            emission_cap=periodic(doc.get("emission_cap"), horizon, "emission_cap", period0=math.inf, default="inf"),
            emission_factor=periodic(doc.get("emission_factor"), horizon, "emission_factor", default=1.0),
            area_cap=periodic(doc.get("area_cap"), horizon, "area_cap", default="inf"),
            discount_factor=float(disc),
            initial_fleet=fleet,
            safety_margin=float(doc.get("safety_margin", 0.0)),
        )
    except DomainError as exc:
        raise ConfigError(f"instance: {exc}") from None


def load_config(path: str | Path, seed: int | None = None) -> RunConfig:
    """Read a root configuration document and assemble the problem."""
    path = Path(path).resolve()
    root = _read_json(path)
    if not isinstance(root, dict):
        raise ConfigError("root document must be an object", path)
    base = path.parent
    seed = int(root.get("seed", 0)) if seed is None else int(seed)
    try:
        h_doc, _, _ = _section(root.get("horizon"), base, "horizon")
        horizon = parse_horizon(h_doc)
        t_doc, t_base, _ = _section(root.get("technologies"), base, "technologies")
        techs = parse_technologies(t_doc, t_base, horizon, seed)
        i_doc, i_base, _ = _section(root.get("instance"), base, "instance")
        data = parse_instance(i_doc, i_base, horizon, seed)
        degradation = root.get("degradation", "geometric")
        if degradation not in DEGRADATION_MODES:
            raise ConfigError(f"degradation must be one of {DEGRADATION_MODES}")
        tree = build_scenario_tree(techs, horizon)
        problem = Problem(tree, techs, data, degradation)
    except ConfigError as exc:
        if exc.source is None:
            raise ConfigError(str(exc), path) from None
        raise
    except (DomainError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from None
    return RunConfig(path, str(root.get("name", path.stem)), problem, seed, dict(root.get("solver", {})),
                     dict(root.get("studies", {})))
