from __future__ import annotations

import time
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from efmatch.core import MarketInstance
from efmatch.generate import complete_hrlq, make_rng


@dataclass
class MetricStatistics:
    """Statistics for a single metric across repetitions."""

    avg: float | None
    min: float | None
    max: float | None
    stddev: float | None

    def to_dict(self) -> dict[str, float | None]:
        return asdict(self)


def compute_stats(values: Sequence[float | int | None]) -> MetricStatistics:
    """Compute avg, min, max, stddev for a list of numeric values."""
    nums = [v for v in values if v is not None]
    if not nums:
        return MetricStatistics(avg=None, min=None, max=None, stddev=None)

    arr = np.array(nums, dtype=float)
    return MetricStatistics(
        avg=round(float(np.mean(arr)), 6),
        min=round(float(np.min(arr)), 6),
        max=round(float(np.max(arr)), 6),
        stddev=round(float(np.std(arr)), 6),
    )


def fit_exponent(sizes: Sequence[float], seconds: Sequence[float]) -> float:
    """Slope of the least-squares line through (log size, log seconds)."""
    if len(sizes) != len(seconds) or len(sizes) < 2:
        raise ValueError("need at least two (size, time) points of equal length")
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.maximum(np.asarray(seconds, dtype=float), 1e-9))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


@dataclass
class BenchPoint:
    edges: int
    stats: MetricStatistics


@dataclass
class BenchSeries:
    solver: str
    points: list[BenchPoint]
    exponent: float | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "solver": self.solver,
            "exponent": self.exponent,
            "points": [{"edges": p.edges, **p.stats.to_dict()} for p in self.points],
        }


def bench_instance(edges: int, seed: int, hospitals: int = 10) -> MarketInstance:
    """Complete interval-quota market with roughly ``edges`` acceptable pairs."""
    return complete_hrlq(make_rng(seed), doctors=max(1, edges // hospitals), hospitals=hospitals)


def _solvers() -> dict[str, Callable[[MarketInstance], object]]:
    from efmatch.solvers.fixedpoint import solve
    from efmatch.solvers.hr import ef_hrlq

    return {"hrlq": ef_hrlq, "csm": solve}


def run_bench(
    sizes: Sequence[int],
    solvers: Sequence[str] = ("hrlq", "csm"),
    repeat: int = 3,
    seed: int = 0,
) -> list[BenchSeries]:
    """Time each solver on generated instances of each size and fit the scaling exponent."""
    available = _solvers()
    unknown = set(solvers) - available.keys()
    if unknown:
        raise ValueError(f"unknown solver(s): {sorted(unknown)}")
    instances = {size: bench_instance(size, seed) for size in sizes}
    series: list[BenchSeries] = []
    for name in solvers:
        points = []
        for size, instance in instances.items():
            timings = []
            for _ in range(repeat):
                started = time.perf_counter()
                available[name](instance)
                timings.append(time.perf_counter() - started)
            points.append(BenchPoint(len(instance.edges), compute_stats(timings)))
        exponent = (
            fit_exponent([p.edges for p in points], [p.stats.min or 0.0 for p in points])
            if len(points) >= 2
            else None
        )
        series.append(BenchSeries(name, points, exponent))
    return series
