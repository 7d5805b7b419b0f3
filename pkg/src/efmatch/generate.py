"""Seeded instance generators.

All randomness comes from numpy's PCG64 bit generator so a seed reproduces
the same instance on every platform.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from efmatch.config import GeneratorKind
from efmatch.core import MarketInstance
from efmatch.errors import ConfigError
from efmatch.oracle import random_cnf, reduce_sat
from efmatch.quotas.base import (
    ClassBound,
    IntervalQuota,
    LaminarQuota,
    QuotaSpec,
    Section,
    StaffingQuota,
)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def lower_quota_deadlock() -> MarketInstance:
    """Two doctors, two hospitals, lower quota 1 each, and no envy-free matching."""
    return MarketInstance.from_preferences(
        doctor_prefs={"d1": ["h1"], "d2": ["h1", "h2"]},
        hospital_prefs={"h1": ["d2", "d1"], "h2": ["d2"]},
        quotas={"h1": IntervalQuota(1, 2), "h2": IntervalQuota(1, 2)},
    )


def _names(prefix: str, count: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(1, count + 1)]


def _assemble(
    rng: np.random.Generator,
    adjacency: np.ndarray,
    doctors: list[str],
    hospitals: list[str],
    quota_for: Any,
) -> MarketInstance:
    """Shuffle preference lists over ``adjacency`` and attach ``quota_for(ground)`` per hospital."""
    doctor_prefs = {
        d: tuple(hospitals[j] for j in rng.permutation(np.flatnonzero(adjacency[i])))
        for i, d in enumerate(doctors)
    }
    hospital_prefs = {
        h: tuple(doctors[i] for i in rng.permutation(np.flatnonzero(adjacency[:, j])))
        for j, h in enumerate(hospitals)
    }
    quotas: dict[str, QuotaSpec] = {
        h: quota_for(frozenset(hospital_prefs[h])) for h in hospitals
    }
    return MarketInstance(
        doctors=tuple(doctors),
        hospitals=tuple(hospitals),
        edges=frozenset(
            (doctors[i], hospitals[j]) for i, j in zip(*np.nonzero(adjacency))
        ),
        doctor_prefs=doctor_prefs,
        hospital_prefs=hospital_prefs,
        quotas=quotas,
    )


def _adjacency(rng: np.random.Generator, doctors: int, hospitals: int, density: float) -> np.ndarray:
    return rng.random((doctors, hospitals)) < density


def random_hrlq(
    rng: np.random.Generator,
    doctors: int = 4,
    hospitals: int = 2,
    density: float = 0.6,
    max_upper: int | None = None,
) -> MarketInstance:
    """Random acceptability with random interval quotas ``0 <= l <= u <= |A(h)|``."""

    def interval(ground: frozenset[str]) -> QuotaSpec:
        cap = len(ground) if max_upper is None else min(len(ground), max_upper)
        upper = int(rng.integers(0, cap + 1))
        return IntervalQuota(int(rng.integers(0, upper + 1)), upper)

    return _assemble(
        rng,
        _adjacency(rng, doctors, hospitals, density),
        _names("d", doctors),
        _names("h", hospitals),
        interval,
    )


def complete_hrlq(rng: np.random.Generator, doctors: int = 4, hospitals: int = 2) -> MarketInstance:
    """Every pair acceptable, with lower quotas summing to at most the doctor count."""
    total = int(rng.integers(0, doctors + 1))
    lowers = rng.multinomial(total, np.full(hospitals, 1 / hospitals)) if hospitals else []
    spare = iter(lowers)

    def interval(ground: frozenset[str]) -> QuotaSpec:
        lower = int(next(spare))
        return IntervalQuota(lower, lower + int(rng.integers(0, len(ground) - lower + 1)))

    return _assemble(
        rng,
        np.ones((doctors, hospitals), dtype=bool),
        _names("d", doctors),
        _names("h", hospitals),
        interval,
    )


def _laminar_sets(rng: np.random.Generator, members: list[str]) -> list[frozenset[str]]:
    """Random nested-or-disjoint subsets obtained by recursive splitting."""
    found: list[frozenset[str]] = []
    stack = [members]
    while stack:
        part = stack.pop()
        if rng.random() < 0.6:
            found.append(frozenset(part))
        if len(part) >= 2 and rng.random() < 0.7:
            cut = int(rng.integers(1, len(part)))
            stack.extend([part[:cut], part[cut:]])
    return found


def random_laminar(
    rng: np.random.Generator,
    doctors: int = 4,
    hospitals: int = 2,
    density: float = 0.6,
) -> MarketInstance:
    """Laminar quotas whose bounds are chosen around a hidden acceptable set."""

    def laminar(ground: frozenset[str]) -> QuotaSpec:
        members = [str(e) for e in rng.permutation(sorted(ground))]
        hidden = frozenset(e for e in members if rng.random() < 0.5)
        classes = []
        for cls in _laminar_sets(rng, members):
            inside = len(hidden & cls)
            classes.append(
                ClassBound(
                    cls,
                    int(rng.integers(0, inside + 1)),
                    int(rng.integers(inside, len(cls) + 1)),
                )
            )
        return LaminarQuota(tuple(classes))

    return _assemble(
        rng,
        _adjacency(rng, doctors, hospitals, density),
        _names("d", doctors),
        _names("h", hospitals),
        laminar,
    )


def random_staffing(
    rng: np.random.Generator,
    doctors: int = 4,
    hospitals: int = 2,
    density: float = 0.6,
    max_sections: int = 3,
) -> MarketInstance:
    """Staffing quotas whose section bounds fit a hidden assignment."""

    def staffing(ground: frozenset[str]) -> QuotaSpec:
        members = sorted(ground)
        count = int(rng.integers(1, max_sections + 1))
        accepts = [frozenset(d for d in members if rng.random() < 0.6) for _ in range(count)]
        load = [0] * count
        for d in members:
            options = [s for s in range(count) if d in accepts[s]]
            if options and rng.random() < 0.5:
                load[options[int(rng.integers(0, len(options)))]] += 1
        sections = tuple(
            Section(
                f"s{s + 1}",
                accepts[s],
                int(rng.integers(0, load[s] + 1)),
                int(rng.integers(load[s], len(accepts[s]) + 1)),
            )
            for s in range(count)
        )
        return StaffingQuota(sections)

    return _assemble(
        rng,
        _adjacency(rng, doctors, hospitals, density),
        _names("d", doctors),
        _names("h", hospitals),
        staffing,
    )


def generate_instance(kind: GeneratorKind, seed: int, **params: Any) -> MarketInstance:
    """Build one instance of ``kind``; ``params`` are the generator's size arguments."""
    rng = make_rng(seed)
    doctors = params.get("doctors", 4)
    hospitals = params.get("hospitals", 2)
    density = params.get("density", 0.6)
    if min(doctors, hospitals) < 0:
        raise ConfigError("doctor and hospital counts must be non-negative")
    match kind:
        case GeneratorKind.DEADLOCK:
            return lower_quota_deadlock()
        case GeneratorKind.SAT:
            n = params.get("n", 3)
            if n < 0 or n % 3:
                raise ConfigError(f"--n must be a non-negative multiple of 3, got {n}")
            return reduce_sat(random_cnf(n, rng))
        case GeneratorKind.RANDOM_HRLQ:
            return random_hrlq(rng, doctors, hospitals, density)
        case GeneratorKind.COMPLETE_HRLQ:
            return complete_hrlq(rng, doctors, hospitals)
        case GeneratorKind.RANDOM_LAMINAR:
            return random_laminar(rng, doctors, hospitals, density)
        case GeneratorKind.RANDOM_STAFFING:
            return random_staffing(rng, doctors, hospitals, density)
    raise ConfigError(f"unknown generator kind: {kind}")
