"""Profiles and per-unit model coefficients.

Generation per unit is the version's base profile scaled by the efficiency
state frozen at its install node and by age degradation. Storage capacity
per unit degrades with age only; the battery efficiency state shrinks the
footprint instead.
"""

from __future__ import annotations

import csv
import math
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .domain import (
    DomainError,
    Horizon,
    InstanceData,
    ScenarioTree,
    TechnologySpec,
    TechState,
    VersionSpec,
)

DEGRADATION_MODES = ("geometric", "linear")


class OutOfWindowError(DomainError):
    """Operating period outside the unit's service window."""


def degradation_factor(rate: float, age: int, mode: str = "geometric") -> float:
    """Remaining output fraction after ``age`` years.

    ``geometric`` is ``(1 - rate) ** age``; ``linear`` is
    ``max(0, 1 - rate * age)``.
    """
    if age < 0:
        raise OutOfWindowError(f"negative age {age}")
    if mode == "geometric":
        return (1.0 - rate) ** age
    if mode == "linear":
        return max(0.0, 1.0 - rate * age)
    raise ValueError(f"unknown degradation mode {mode!r}; expected one of {DEGRADATION_MODES}")


class Coefficients:
    """Memoized coefficient oracle for one tree, technology set and instance.

    Methods take the technology and version either as spec objects or by
    name. Install-dependent quantities use the state of the node owning the
    install period on the path to ``n``.
    """

    def __init__(
        self,
        tree: ScenarioTree,
        techs: Sequence[TechnologySpec],
        data: InstanceData,
        degradation: str = "geometric",
    ):
        if degradation not in DEGRADATION_MODES:
            raise ValueError(f"unknown degradation mode {degradation!r}")
        self.tree = tree
        self.techs = {t.name: t for t in techs}
        self.data = data
        self.degradation = degradation
        Q = tree.horizon.subperiods_per_period
        for tech in techs:
            for v in tech.versions:
                if tech.is_generation:
                    if v.profile is None:
                        raise DomainError(f"{tech.name}/{v.name}: generation version has no profile")
                    if v.profile.shape != (Q,):
                        raise DomainError(
                            f"{tech.name}/{v.name}: profile length {v.profile.shape[0]} != {Q} sub-periods"
                        )
        self._generation = lru_cache(maxsize=None)(self._generation_impl)

    # -- helpers ----------------------------------------------------------
    def _resolve(self, tech, version) -> tuple[TechnologySpec, VersionSpec]:
        spec = self.techs[tech] if isinstance(tech, str) else tech
        ver = spec.version(version) if isinstance(version, str) else version
        return spec, ver

    def install_node(self, n: int, t: int) -> int:
        return self.tree.ancestor(n, t)

    def state(self, tech: TechnologySpec, t: int, n: int) -> TechState:
        node = self.tree.node(self.install_node(n, t))
        return node.state.get(tech.name, TechState())

    def _window(self, spec: TechnologySpec, t: int, t_op: int) -> None:
        if not spec.operational(t, t_op):
            raise OutOfWindowError(
                f"{spec.name}: period {t_op} outside service window [{t}, {t + spec.lifetime_at(t)})"
            )

    # -- generation and storage ---------------------------------------------
    def gen_scalar(self, tech, version, t: int, t_op: int, n: int) -> float:
        """Efficiency-state times degradation multiplier on the base profile."""
        spec, _ = self._resolve(tech, version)
        self._window(spec, t, t_op)
        eff = self.state(spec, t, n).efficiency
        return eff * degradation_factor(spec.degradation_rate, t_op - t, self.degradation)

    def _generation_impl(self, tech: str, version: str, t: int, t_op: int, n: int) -> np.ndarray:
        spec, ver = self._resolve(tech, version)
        out = ver.profile * self.gen_scalar(spec, ver, t, t_op, n)
        out.setflags(write=False)
        return out

    def generation(self, tech, version, t: int, t_op: int, n: int) -> np.ndarray:
        """Per-unit output in every sub-period of operating period ``t_op``."""
        spec, ver = self._resolve(tech, version)
        # install state only depends on the node owning period t
        return self._generation(spec.name, ver.name, t, t_op, self.install_node(n, t))

    def storage_capacity(self, tech, version, t: int, t_op: int, n: int) -> float:
        spec, ver = self._resolve(tech, version)
        self._window(spec, t, t_op)
        return ver.rated_capacity * degradation_factor(spec.degradation_rate, t_op - t, self.degradation)

    # -- costs ----------------------------------------------------------
    def install_cost(self, tech, version, t: int, n: int) -> float:
        spec, ver = self._resolve(tech, version)
        return ver.install_cost * self.state(spec, t, n).cost

    def om_cost(self, tech, version, t: int, t_op: int, n: int) -> float:
        """O&M per operating unit in calendar period ``t_op``."""
        spec, ver = self._resolve(tech, version)
        self._window(spec, t, t_op)
        return spec.om_cost * ver.rated_capacity * spec.om_annual_multiplier ** (t_op - 1)

    def salvage_value(self, tech, version, t: int, t_op: int, n: int) -> float:
        """Resale value per unit retired in ``t_op``, linear in age down to zero."""
        spec, ver = self._resolve(tech, version)
        self._window(spec, t, t_op)
        tau = spec.lifetime_at(t)
        return spec.salvage_fraction * self.install_cost(spec, ver, t, n) * max(0.0, 1.0 - (t_op - t) / tau)

    def spatial(self, tech, version, t: int, n: int) -> float:
        spec, ver = self._resolve(tech, version)
        if spec.is_generation:
            return ver.spatial_requirement
        return ver.spatial_requirement / self.state(spec, t, n).efficiency


# -- series utilities ----------------------------------------------------------


def aggregate(series, block: int) -> np.ndarray:
    """Sum consecutive blocks of ``block`` entries along the last axis."""
    arr = np.asarray(series, dtype=float)
    if int(block) != block or block < 1:
        raise ValueError(f"block must be a positive integer, got {block!r}")
    n = arr.shape[-1]
    if n % block:
        raise ValueError(f"block {block} does not divide series length {n}")
    if block == 1:
        return arr.copy()
    return arr.reshape(*arr.shape[:-1], n // block, block).sum(axis=-1)


def shear_extrapolate(v_ref: float, h_ref: float, h_target: float, alpha: float) -> float:
    """Power-law wind speed at ``h_target`` from a reading at ``h_ref``."""
    if h_ref <= 0 or h_target <= 0:
        raise DomainError("heights must be positive")
    if v_ref < 0:
        raise DomainError("reference speed must be nonnegative")
    return v_ref * (h_target / h_ref) ** alpha


def check_annual_generation(version: VersionSpec, rtol: float = 1e-3) -> float:
    """Relative mismatch between a profile's total and its declared annual energy."""
    if version.profile is None or version.annual_generation is None:
        raise DomainError(f"{version.name}: profile and annual generation are both required")
    total = float(version.profile.sum())
    rel = abs(total - version.annual_generation) / version.annual_generation
    if rel > rtol:
        raise DomainError(
            f"{version.name}: profile sums to {total:.6g} kWh, declared {version.annual_generation:.6g} kWh"
        )
    return rel


def _fit_length(values: np.ndarray, Q: int, what: str) -> np.ndarray:
    n = values.shape[0]
    if n == Q:
        return values
    if n > Q and n % Q == 0:
        return aggregate(values.T, n // Q).T
    raise DomainError(f"{what}: {n} rows cannot be mapped onto {Q} sub-periods")


def load_demand_csv(path: str | Path, horizon: Horizon) -> np.ndarray:
    """Demand CSV with a ``kwh`` column; finer data is summed down to the horizon."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "kwh" not in reader.fieldnames:
            raise DomainError(f"{path}: expected a 'kwh' column")
        vals = []
        for lineno, row in enumerate(reader, start=2):
            try:
                vals.append(float(row["kwh"]))
            except (TypeError, ValueError):
                raise DomainError(f"{path}:{lineno}: bad kwh value {row['kwh']!r}") from None
    arr = np.array(vals)
    if np.any(arr < 0):
        raise DomainError(f"{path}: negative demand")
    return _fit_length(arr, horizon.subperiods_per_period, str(path))


def load_profiles_csv(path: str | Path, horizon: Horizon) -> dict[str, np.ndarray]:
    """Per-version profiles, one column per version, one row per sub-period."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DomainError(f"{path}: empty profile file")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DomainError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from None
    data = _fit_length(np.array(rows, dtype=float).reshape(-1, len(header)), horizon.subperiods_per_period, str(path))
    if np.any(data < 0):
        raise DomainError(f"{path}: negative generation")
    return {name.strip(): data[:, j].copy() for j, name in enumerate(header)}


def capacity_factor_profile(shape, rated_capacity: float, capacity_factor: float, hours: float) -> np.ndarray:
    """Scale a nonnegative shape so one period yields ``rated * cf * hours`` kWh."""
    shape = np.asarray(shape, dtype=float)
    if np.any(shape < 0) or shape.sum() <= 0:
        raise DomainError("shape must be nonnegative with a positive total")
    return shape / shape.sum() * rated_capacity * capacity_factor * hours


SYNTHETIC_SHAPES = ("solar", "wind", "campus", "flat")


def synthetic_shape(kind: str, steps: int, step_hours: float, seed: int = 0) -> np.ndarray:
    """Deterministic stand-in shape for one year of ``steps`` sub-periods.

    ``solar`` is a clear-sky style daylight curve with a summer peak,
    ``wind`` a seeded autocorrelated series with a winter peak, ``campus``
    a weekday/daytime load with a mild winter peak and a summer-break dip,
    and ``flat`` a constant. For sub-periods of a day or longer the daily
    cycle averages out and only the seasonal pattern remains. Only the
    shape matters; scale with :func:`capacity_factor_profile` or by a total.
    """
    if kind not in SYNTHETIC_SHAPES:
        raise DomainError(f"unknown synthetic shape {kind!r}; expected one of {SYNTHETIC_SHAPES}")
    if steps < 1 or step_hours <= 0:
        raise DomainError("steps and step_hours must be positive")
    year_hours = steps * step_hours
    # evaluate on an hourly grid (or finer) and integrate over each sub-period
    sub = max(1, int(math.ceil(step_hours)))
    hours = (np.arange(steps * sub) + 0.5) * (step_hours / sub)
    hod = hours % 24.0
    season = np.cos(2 * np.pi * (hours / year_hours - 0.47))  # +1 near mid-year
    if kind == "flat":
        fine = np.ones_like(hours)
    elif kind == "solar":
        fine = np.clip(np.sin(np.pi * (hod - 6.0) / 12.0), 0.0, None) * (1.0 + 0.45 * season)
    elif kind == "wind":
        rng = np.random.default_rng(seed)
        n = steps * sub
        noise = np.empty(n)
        noise[0] = rng.standard_normal()
        shocks = rng.standard_normal(n)
        phi = 0.97
        for i in range(1, n):
            noise[i] = phi * noise[i - 1] + math.sqrt(1 - phi * phi) * shocks[i]
        speed = np.clip(6.0 - 1.2 * season + 2.0 * noise, 0.0, None)
        fine = np.clip((speed - 3.0) / (12.0 - 3.0), 0.0, 1.0) ** 3
    else:
        day = np.floor(hours / 24.0)
        weekday = (day % 7) < 5
        daytime = (hod >= 8) & (hod < 20)
        summer_break = np.abs(hours / year_hours - 0.6) < 0.06
        fine = 1.0 + 0.6 * (weekday & daytime) + 0.15 * (-season) - 0.3 * summer_break
    shape = fine.reshape(steps, sub).sum(axis=1)
    if shape.sum() <= 0:
        shape = np.ones(steps)
    return shape
