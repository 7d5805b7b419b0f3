"""Market instances, matchings, and the stability and envy-freeness predicates."""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import NamedTuple

from efmatch.errors import InfeasibleMatchingError, InvalidMatchingError, QuotaError
from efmatch.quotas.base import (
    ClassBound,
    ExplicitQuota,
    IntervalQuota,
    LaminarQuota,
    QuotaSpec,
    StaffingQuota,
    admits,
    full_set_lower,
    full_set_upper,
    quota_violations,
)

Pair = tuple[str, str]

NO_ENVY_FREE = "there is no envy-free matching"


@dataclass(frozen=True)
class MarketInstance:
    """Doctors, hospitals, acceptable pairs, strict preferences and quotas.

    Instances are immutable; derived lookups are computed once on first use.
    """

    doctors: tuple[str, ...]
    hospitals: tuple[str, ...]
    edges: frozenset[Pair]
    doctor_prefs: Mapping[str, tuple[str, ...]]
    hospital_prefs: Mapping[str, tuple[str, ...]]
    quotas: Mapping[str, QuotaSpec]
    _admits_memo: dict[tuple[str, frozenset[str]], bool] = field(
        default_factory=dict, init=False, repr=False, compare=False, hash=False
    )

    @classmethod
    def from_preferences(
        cls,
        doctor_prefs: Mapping[str, Iterable[str]],
        hospital_prefs: Mapping[str, Iterable[str]],
        quotas: Mapping[str, QuotaSpec],
    ) -> MarketInstance:
        """Build an instance whose edges are read off the doctors' lists."""
        d_prefs = {d: tuple(hs) for d, hs in doctor_prefs.items()}
        return cls(
            doctors=tuple(d_prefs),
            hospitals=tuple(hospital_prefs),
            edges=frozenset((d, h) for d, hs in d_prefs.items() for h in hs),
            doctor_prefs=d_prefs,
            hospital_prefs={h: tuple(ds) for h, ds in hospital_prefs.items()},
            quotas=dict(quotas),
        )

    @cached_property
    def _doctors_of(self) -> dict[str, frozenset[str]]:
        grouped: dict[str, set[str]] = {h: set() for h in self.hospitals}
        for d, h in self.edges:
            grouped.setdefault(h, set()).add(d)
        return {h: frozenset(ds) for h, ds in grouped.items()}

    @cached_property
    def _hospitals_of(self) -> dict[str, frozenset[str]]:
        grouped: dict[str, set[str]] = {d: set() for d in self.doctors}
        for d, h in self.edges:
            grouped.setdefault(d, set()).add(h)
        return {d: frozenset(hs) for d, hs in grouped.items()}

    def acceptable_doctors(self, hospital: str) -> frozenset[str]:
        return self._doctors_of.get(hospital, frozenset())

    def acceptable_hospitals(self, doctor: str) -> frozenset[str]:
        return self._hospitals_of.get(doctor, frozenset())

    @cached_property
    def doctor_rank(self) -> dict[str, dict[str, int]]:
        """Position of each hospital in each doctor's list (0 is best)."""
        return {d: {h: i for i, h in enumerate(hs)} for d, hs in self.doctor_prefs.items()}

    @cached_property
    def hospital_rank(self) -> dict[str, dict[str, int]]:
        return {h: {d: i for i, d in enumerate(ds)} for h, ds in self.hospital_prefs.items()}

    def admits(self, hospital: str, chosen: frozenset[str]) -> bool:
        """Whether ``chosen`` is an acceptable doctor set for ``hospital``."""
        key = (hospital, chosen)
        cached = self._admits_memo.get(key)
        if cached is None:
            cached = admits(self.quotas[hospital], self.acceptable_doctors(hospital), chosen)
            self._admits_memo[key] = cached
        return cached

    @property
    def is_interval(self) -> bool:
        return all(isinstance(self.quotas.get(h), IntervalQuota) for h in self.hospitals)


@dataclass(frozen=True)
class Matching:
    """A set of acceptable pairs with per-doctor and per-hospital views.

    Construction accepts any assignment; ``by_doctor`` refuses one that gives
    a doctor two hospitals.
    """

    pairs: frozenset[Pair] = frozenset()

    @classmethod
    def from_pairs(cls, pairs: Iterable[Iterable[str]]) -> Matching:
        collected: set[Pair] = set()
        for pair in pairs:
            doctor, hospital = pair
            collected.add((doctor, hospital))
        return cls(frozenset(collected))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[Pair]:
        return iter(sorted(self.pairs))

    @cached_property
    def by_doctor(self) -> dict[str, str]:
        assigned: dict[str, str] = {}
        for doctor, hospital in sorted(self.pairs):
            if doctor in assigned:
                raise InvalidMatchingError(
                    f"doctor '{doctor}' is assigned to both '{assigned[doctor]}' and '{hospital}'"
                )
            assigned[doctor] = hospital
        return assigned

    @cached_property
    def by_hospital(self) -> dict[str, frozenset[str]]:
        grouped: dict[str, set[str]] = {}
        for doctor, hospital in self.pairs:
            grouped.setdefault(hospital, set()).add(doctor)
        return {h: frozenset(ds) for h, ds in grouped.items()}

    def hospital_of(self, doctor: str) -> str | None:
        return self.by_doctor.get(doctor)

    def doctors_at(self, hospital: str) -> frozenset[str]:
        return self.by_hospital.get(hospital, frozenset())

    def counts(self, hospitals: Iterable[str]) -> dict[str, int]:
        return {h: len(self.doctors_at(h)) for h in hospitals}


@dataclass(frozen=True)
class Violation:
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.location}: {self.message}"


class EnvyWitness(NamedTuple):
    envier: str
    envied: str
    hospital: str


class BlockingPair(NamedTuple):
    doctor: str
    hospital: str


@dataclass(frozen=True)
class NoEnvyFreeMatching:
    """Solver verdict; ``deficits`` maps each short hospital to its missing count."""

    deficits: Mapping[str, int] = field(default_factory=dict)

    def __str__(self) -> str:
        return NO_ENVY_FREE


def _preference_violations(
    kind: str,
    owners: tuple[str, ...],
    prefs: Mapping[str, tuple[str, ...]],
    acceptable: Mapping[str, frozenset[str]],
) -> list[Violation]:
    problems: list[Violation] = []
    for owner in sorted(set(prefs) - set(owners)):
        problems.append(Violation(f"{kind}_prefs.{owner}", f"unknown {kind}"))
    for owner in owners:
        ranked = prefs.get(owner, ())
        location = f"{kind}_prefs.{owner}"
        if len(set(ranked)) != len(ranked):
            problems.append(Violation(location, "preference is not strict (repeated entry)"))
        listed = frozenset(ranked)
        expected = acceptable.get(owner, frozenset())
        if listed != expected:
            extra = sorted(listed - expected)
            missing = sorted(expected - listed)
            problems.append(
                Violation(location, f"pref/edge mismatch (extra {extra}, missing {missing})")
            )
    return problems


def validate(instance: MarketInstance) -> list[Violation]:
    """Every violated instance or quota invariant; an empty list means valid."""
    from efmatch.quotas.compilers import Infeasible, compile_quota

    problems: list[Violation] = []
    for kind, names in (("doctor", instance.doctors), ("hospital", instance.hospitals)):
        if len(set(names)) != len(names):
            problems.append(Violation(f"{kind}s", f"{kind} identifiers are not unique"))

    doctors, hospitals = set(instance.doctors), set(instance.hospitals)
    for d, h in sorted(instance.edges):
        if d not in doctors or h not in hospitals:
            problems.append(Violation(f"edges.({d},{h})", "edge names an unknown doctor or hospital"))

    problems.extend(
        _preference_violations(
            "doctor",
            instance.doctors,
            instance.doctor_prefs,
            {d: instance.acceptable_hospitals(d) for d in instance.doctors},
        )
    )
    problems.extend(
        _preference_violations(
            "hospital",
            instance.hospitals,
            instance.hospital_prefs,
            {h: instance.acceptable_doctors(h) for h in instance.hospitals},
        )
    )

    for h in sorted(set(instance.quotas) - hospitals):
        problems.append(Violation(f"quotas.{h}", "quota for unknown hospital"))
    for h in instance.hospitals:
        spec = instance.quotas.get(h)
        location = f"quotas.{h}"
        if spec is None:
            problems.append(Violation(location, "hospital has no quota"))
            continue
        ground = instance.acceptable_doctors(h)
        structural = quota_violations(spec, ground)
        problems.extend(Violation(location, message) for message in structural)
        if not structural and isinstance(spec, LaminarQuota | StaffingQuota):
            outcome = compile_quota(spec, ground)
            if isinstance(outcome, Infeasible):
                problems.append(Violation(location, f"quota family is empty: {outcome.reason}"))
    return problems


def _check_pairs(instance: MarketInstance, matching: Matching) -> None:
    outside = matching.pairs - instance.edges
    if outside:
        d, h = sorted(outside)[0]
        raise InvalidMatchingError(
            f"pair ({d}, {h}) is not an acceptable pair ({len(outside)} such pair(s))"
        )


def is_feasible(instance: MarketInstance, matching: Matching) -> bool:
    """Each doctor has at most one hospital and each hospital an acceptable set."""
    _check_pairs(instance, matching)
    doctors = [d for d, _ in matching.pairs]
    if len(set(doctors)) != len(doctors):
        return False
    return all(instance.admits(h, matching.doctors_at(h)) for h in instance.hospitals)


def _require_feasible(instance: MarketInstance, matching: Matching) -> None:
    if not is_feasible(instance, matching):
        raise InfeasibleMatchingError("matching is not feasible for the instance quotas")


def _improving_hospitals(
    instance: MarketInstance, matching: Matching, doctor: str
) -> Iterator[str]:
    """Hospitals ``doctor`` strictly prefers to their current assignment."""
    current = matching.hospital_of(doctor)
    for hospital in instance.doctor_prefs.get(doctor, ()):
        if hospital == current:
            return
        yield hospital


def find_justified_envy(instance: MarketInstance, matching: Matching) -> list[EnvyWitness]:
    _require_feasible(instance, matching)
    found: list[EnvyWitness] = []
    for doctor in instance.doctors:
        for hospital in _improving_hospitals(instance, matching, doctor):
            held = matching.doctors_at(hospital)
            rank = instance.hospital_rank[hospital]
            for other in instance.hospital_prefs[hospital][rank[doctor] + 1 :]:
                if other in held and instance.admits(hospital, (held - {other}) | {doctor}):
                    found.append(EnvyWitness(doctor, other, hospital))
    return found


def find_blocking_pairs(instance: MarketInstance, matching: Matching) -> list[BlockingPair]:
    _require_feasible(instance, matching)
    found: list[BlockingPair] = []
    for doctor in instance.doctors:
        for hospital in _improving_hospitals(instance, matching, doctor):
            held = matching.doctors_at(hospital)
            rank = instance.hospital_rank[hospital]
            if instance.admits(hospital, held | {doctor}) or any(
                other in held and instance.admits(hospital, (held - {other}) | {doctor})
                for other in instance.hospital_prefs[hospital][rank[doctor] + 1 :]
            ):
                found.append(BlockingPair(doctor, hospital))
    return found


def is_envy_free(instance: MarketInstance, matching: Matching) -> bool:
    return is_feasible(instance, matching) and not find_justified_envy(instance, matching)


def is_stable(instance: MarketInstance, matching: Matching) -> bool:
    return is_feasible(instance, matching) and not find_blocking_pairs(instance, matching)


def _truncated_bounds(
    bounds: tuple[ClassBound, ...], ground: frozenset[str], lower: int, k: int
) -> tuple[ClassBound, ...]:
    kept = tuple(b for b in bounds if b.members != ground)
    return (*kept, ClassBound(ground, lower, k))


def truncate(spec: QuotaSpec, ground: frozenset[str], k: int) -> QuotaSpec:
    """Cap the number of chosen doctors at ``k``, leaving every other bound as is."""
    upper = full_set_upper(spec, ground)
    lower = full_set_lower(spec, ground)
    if not lower <= k <= upper:
        raise QuotaError(f"truncation k={k} outside [{lower}, {upper}]")
    match spec:
        case IntervalQuota(lower=lo, upper=hi):
            return IntervalQuota(lo, min(hi, k))
        case ExplicitQuota(constraints=bounds):
            return ExplicitQuota(_truncated_bounds(bounds, ground, lower, k))
        case LaminarQuota(classes=bounds):
            return LaminarQuota(_truncated_bounds(bounds, ground, lower, k))
        case StaffingQuota(sections=sections):
            return StaffingQuota(sections, k)
    raise TypeError(f"unknown quota type: {type(spec).__name__}")


def truncate_instance(instance: MarketInstance, sizes: Mapping[str, int]) -> MarketInstance:
    """Truncate the quota of each hospital in ``sizes`` at the given size."""
    quotas = dict(instance.quotas)
    for hospital, k in sizes.items():
        quotas[hospital] = truncate(quotas[hospital], instance.acceptable_doctors(hospital), k)
    return replace(instance, quotas=quotas)
