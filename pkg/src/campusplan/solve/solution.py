"""Solver output container and CSV interchange."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

STATUSES = ("optimal", "gap_reached", "time_limit", "infeasible", "unbounded")


def optimality_gap(lower: float, upper: float) -> float:
    """Percentage gap ``100 * (1 - LB/UB)``.

    The formula is undefined at ``UB = 0``: equal bounds give 0 and
    otherwise the absolute gap is used (scaled by ``|UB|`` when ``UB < 0``).
    """
    if not (math.isfinite(lower) and math.isfinite(upper)):
        return math.inf
    if upper == lower:
        return 0.0
    if upper > 0:
        return 100.0 * (1.0 - lower / upper)
    denom = abs(upper) if upper < 0 else 1.0
    return 100.0 * (upper - lower) / denom


@dataclass
class Solution:
    x: np.ndarray | None
    objective: float
    bound: float
    status: str
    wall_time: float = 0.0
    nodes: int = 0
    col_names: list[str] | None = None

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    @property
    def gap(self) -> float:
        return optimality_gap(self.bound, self.objective)

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None

    def value(self, name: str) -> float:
        if self.col_names is None or self.x is None:
            raise KeyError(name)
        return float(self.x[self.col_names.index(name)])

    def to_csv(self, path: str | Path) -> None:
        """Write ``column,value`` rows in column order."""
        if self.x is None or self.col_names is None:
            raise ValueError("no incumbent to write")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["column", "value"])
            for name, val in zip(self.col_names, self.x):
                w.writerow([name, format(float(val) + 0.0, ".17g")])


def read_solution_csv(path: str | Path) -> dict[str, float]:
    """Read an externally produced ``column,value`` file."""
    out: dict[str, float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"column", "value"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header 'column,value'")
        for lineno, row in enumerate(reader, start=2):
            try:
                out[row["column"]] = float(row["value"])
            except (TypeError, ValueError):
                raise ValueError(f"{path}:{lineno}: bad value {row['value']!r}") from None
    return out


def solution_from_values(values: dict[str, float], col_names: list[str], objective: float | None = None, c=None) -> Solution:
    """Assemble a :class:`Solution` from a name-value mapping.

    Columns absent from ``values`` become NaN so that an audit flags them.
    """
    x = np.array([values.get(name, np.nan) for name in col_names], dtype=float)
    if objective is None:
        objective = float(np.nansum(np.asarray(c) * x)) if c is not None else math.nan
    return Solution(x, objective, objective, "optimal", col_names=list(col_names))
