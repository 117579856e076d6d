"""Advancement branches from historical cost and efficiency series.

Log forward ratios over a fixed window are clustered with Lloyd's k-means;
exponentiated centroids become per-stage multipliers whose probabilities are
the cluster shares.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .domain import Branch, DomainError

log = logging.getLogger(__name__)


class RatioPoint(NamedTuple):
    eff_rate: float
    cost_rate: float


@dataclass(frozen=True)
class ClusterResult:
    centroids: tuple[RatioPoint, ...]
    assignment: tuple[int, ...]
    probabilities: tuple[float, ...]
    objective: float
    history: tuple[float, ...] = ()

    @property
    def populations(self) -> tuple[int, ...]:
        counts = [0] * len(self.centroids)
        for a in self.assignment:
            counts[a] += 1
        return tuple(counts)


def _check_series(series: Mapping[int, float]) -> dict[int, float]:
    out = {}
    for year, value in series.items():
        value = float(value)
        if not value > 0 or not math.isfinite(value):
            raise DomainError(f"series value at {year} must be positive and finite, got {value}")
        out[int(year)] = value
    return out


def log_forward_ratios(series: Mapping[int, float], window: int = 5, sign: float = 1.0):
    """Signed ``ln(value[y + window] / value[y])`` for every usable start year.

    Returns ``(years, rates, warnings)``. A start year whose partner
    ``y + window`` is missing is skipped and reported in ``warnings``.
    """
    if window < 1:
        raise DomainError("window must be >= 1")
    values = _check_series(series)
    years, rates, warnings = [], [], []
    first, last = min(values), max(values)
    for y in range(first, last - window + 1):
        if y not in values or y + window not in values:
            msg = f"gap: no pair ({y}, {y + window})"
            warnings.append(msg)
            log.warning(msg)
            continue
        years.append(y)
        rates.append(sign * math.log(values[y + window] / values[y]))
    return years, rates, warnings


def forward_ratios(
    efficiency: Mapping[int, float] | None = None,
    cost: Mapping[int, float] | None = None,
    window: int = 5,
) -> list[RatioPoint]:
    """Improvement-rate points from efficiency and/or cost series.

    Efficiency rates are ``+ln(ratio)`` and cost rates are ``-ln(ratio)`` so
    that improvement is positive in both coordinates. When both series are
    given, only start years present in both are kept. A missing series
    contributes zeros.
    """
    if efficiency is None and cost is None:
        raise DomainError("at least one series is required")
    eff = dict(zip(*log_forward_ratios(efficiency, window, +1.0)[:2])) if efficiency else None
    cst = dict(zip(*log_forward_ratios(cost, window, -1.0)[:2])) if cost else None
    if eff is not None and cst is not None:
        years = sorted(set(eff) & set(cst))
    else:
        years = sorted(eff if eff is not None else cst)
    return [
        RatioPoint(eff[y] if eff is not None else 0.0, cst[y] if cst is not None else 0.0)
        for y in years
    ]


def _sse(X: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> float:
    return float(((X - centers[labels]) ** 2).sum())


def kmeans(
    points: Sequence[Sequence[float]],
    k: int,
    seed: int = 0,
    n_init: int | None = None,
    max_iter: int = 300,
) -> ClusterResult:
    """Lloyd's algorithm with farthest-first initialization.

    Each run starts from ``points[start % len(points)]``; every further
    center is the point farthest from the centers chosen so far (lowest
    index on ties). Iteration stops once assignments no longer change. A
    cluster that empties out is reseeded with the point farthest from its
    current center. ``n_init`` runs are made with starts ``seed, seed+1,
    ...`` and the one with the smallest objective is kept (earliest on
    ties).

    Parameters
    ----------
    points : sequence of pairs
        Data points, typically :class:`RatioPoint` values.
    k : int
        Number of clusters, ``1 <= k <= len(points)``.
    seed : int
        Selects the first start point; the result is otherwise deterministic.
    n_init : int, optional
        Number of starts. Defaults to ``min(len(points), 50)``.

    Returns
    -------
    ClusterResult
        Centroids, assignments, population shares and the final
        sum of squared distances. ``history`` holds the objective after
        every iteration.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("points must be a non-empty list of coordinate pairs")
    if not 1 <= k <= len(X):
        raise ValueError(f"k must lie in 1..{len(X)}, got {k}")
    if n_init is None:
        n_init = min(len(X), 50)
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    best = None
    for r in range(n_init):
        run = _lloyd(X, k, (seed + r) % len(X), max_iter)
        if best is None or run.objective < best.objective - 1e-15:
            best = run
    return best


def _lloyd(X: np.ndarray, k: int, start: int, max_iter: int) -> ClusterResult:
    idx = [start]
    dist = ((X - X[idx[0]]) ** 2).sum(axis=1)
    while len(idx) < k:
        nxt = int(np.argmax(dist))
        idx.append(nxt)
        dist = np.minimum(dist, ((X - X[nxt]) ** 2).sum(axis=1))
    centers = X[idx].copy()

    labels = np.full(len(X), -1)
    history = []
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        for j in range(k):
            if not np.any(new == j):
                far = int(np.argmax(d2[np.arange(len(X)), new]))
                new[far] = j
        if np.array_equal(new, labels):
            break
        labels = new
        centers = np.array([X[labels == j].mean(axis=0) for j in range(k)])
        history.append(_sse(X, centers, labels))

    probs = np.bincount(labels, minlength=k) / len(X)
    return ClusterResult(
        centroids=tuple(RatioPoint(float(c[0]), float(c[1])) for c in centers),
        assignment=tuple(int(a) for a in labels),
        probabilities=tuple(float(p) for p in probs),
        objective=_sse(X, centers, labels),
        history=tuple(history),
    )


def centroids_to_branches(result: ClusterResult, labels: Sequence[str] | None = None) -> list[Branch]:
    """Exponentiate centroid rates into multiplier branches.

    Branches are ordered by increasing cost rate, so the slower trajectory
    comes first; default labels are ``"s"`` and ``"f"`` for two clusters.
    """
    order = sorted(range(len(result.centroids)), key=lambda j: (result.centroids[j].cost_rate, j))
    if labels is None:
        labels = ["s", "f"] if len(order) == 2 else [f"b{i}" for i in range(len(order))]
    branches = []
    for label, j in zip(labels, order):
        c = result.centroids[j]
        branches.append(
            Branch(
                cost_multiplier=math.exp(-c.cost_rate),
                efficiency_multiplier=math.exp(c.eff_rate),
                probability=result.probabilities[j],
                label=label,
            )
        )
    return branches


def fit_exponential(series: Mapping[int, float], reference_year: int | None = None) -> tuple[float, float]:
    """Least-squares fit of ``ln(value)`` against year.

    Returns the fitted value at ``reference_year`` (first year by default)
    and the annual multiplier ``exp(slope)``.
    """
    values = _check_series(series)
    if len(values) < 2:
        raise DomainError("at least two points are needed for a trend")
    years = np.array(sorted(values), dtype=float)
    logs = np.log([values[int(y)] for y in years])
    slope, intercept = np.polyfit(years, logs, 1)
    ref = years[0] if reference_year is None else reference_year
    return float(math.exp(intercept + slope * ref)), float(math.exp(slope))


def read_series(path: str | Path) -> dict[int, float]:
    """Read a ``year,value`` CSV file."""
    out: dict[int, float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"year", "value"} <= set(reader.fieldnames):
            raise DomainError(f"{path}: expected header 'year,value'")
        for lineno, row in enumerate(reader, start=2):
            try:
                year, value = int(row["year"]), float(row["value"])
            except (TypeError, ValueError) as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from None
            if year in out:
                raise DomainError(f"{path}:{lineno}: duplicate year {year}")
            out[year] = value
    return out


def cluster_report(result: ClusterResult, branches: Sequence[Branch]) -> dict:
    """JSON-ready summary of a clustering run."""
    by_label = []
    order = sorted(range(len(result.centroids)), key=lambda j: (result.centroids[j].cost_rate, j))
    for branch, j in zip(branches, order):
        c = result.centroids[j]
        by_label.append(
            {
                "label": branch.label,
                "eff_rate": round(c.eff_rate, 12),
                "cost_rate": round(c.cost_rate, 12),
                "efficiency_multiplier": round(branch.efficiency_multiplier, 12),
                "cost_multiplier": round(branch.cost_multiplier, 12),
                "probability": round(branch.probability, 12),
                "population": result.populations[j],
            }
        )
    return {"k": len(result.centroids), "objective": round(result.objective, 12), "branches": by_label}
