"""Doctor-proposing deferred acceptance and the envy-free HR-LQ algorithm."""

from __future__ import annotations

import logging
from collections import deque
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace

from efmatch.core import MarketInstance, Matching, NoEnvyFreeMatching
from efmatch.errors import QuotaError
from efmatch.quotas.base import IntervalQuota

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HrQuotas:
    """Scalar lower and upper quota per hospital."""

    lower: Mapping[str, int]
    upper: Mapping[str, int]

    @classmethod
    def from_instance(cls, instance: MarketInstance) -> HrQuotas:
        lower: dict[str, int] = {}
        upper: dict[str, int] = {}
        for hospital in instance.hospitals:
            spec = instance.quotas.get(hospital)
            if not isinstance(spec, IntervalQuota):
                kind = type(spec).__name__ if spec is not None else "no quota"
                raise QuotaError(
                    f"hospital '{hospital}' has {kind}; HR-LQ needs interval quotas"
                )
            lower[hospital] = spec.lower
            upper[hospital] = spec.upper
        return cls(lower, upper)


class _Seats:
    """Doctors a hospital currently holds, indexed by preference position.

    Once the hospital is full its worst held position only moves up the list,
    so scanning for the next worst costs O(|A(h)|) over the whole run.
    """

    def __init__(self, length: int, capacity: int) -> None:
        self.held = bytearray(length)
        self.capacity = capacity
        self.count = 0
        self.worst = -1

    def propose(self, position: int) -> tuple[bool, int | None]:
        """Offer the doctor at ``position``; return (accepted, evicted position)."""
        if self.capacity <= 0:
            return False, None
        if self.count < self.capacity:
            self.held[position] = 1
            self.count += 1
            self.worst = max(self.worst, position)
            return True, None
        if position > self.worst:
            return False, None
        evicted = self.worst
        self.held[evicted] = 0
        self.held[position] = 1
        while not self.held[self.worst]:
            self.worst -= 1
        return True, evicted


def gale_shapley(
    instance: MarketInstance,
    capacities: Mapping[str, int] | None = None,
    order: Sequence[str] | None = None,
) -> Matching:
    """Doctor-optimal stable matching of the HR instance with the given capacities.

    Lower quotas play no part. ``capacities`` defaults to the upper quotas and
    ``order`` (the initial proposal queue) to the instance's doctor order.
    """
    if capacities is None:
        capacities = HrQuotas.from_instance(instance).upper
    seats = {
        h: _Seats(len(instance.hospital_prefs[h]), capacities.get(h, 0))
        for h in instance.hospitals
    }
    next_choice = dict.fromkeys(instance.doctors, 0)
    assigned: dict[str, str] = {}
    queue = deque(instance.doctors if order is None else order)
    proposals = 0

    while queue:
        doctor = queue.popleft()
        prefs = instance.doctor_prefs.get(doctor, ())
        position = next_choice[doctor]
        if position >= len(prefs):
            continue
        hospital = prefs[position]
        next_choice[doctor] = position + 1
        proposals += 1
        accepted, evicted = seats[hospital].propose(instance.hospital_rank[hospital][doctor])
        if not accepted:
            queue.append(doctor)
            continue
        assigned[doctor] = hospital
        if evicted is not None:
            loser = instance.hospital_prefs[hospital][evicted]
            del assigned[loser]
            queue.append(loser)

    logger.debug("gale_shapley: %d proposals, %d pairs", proposals, len(assigned))
    return Matching(frozenset(assigned.items()))


def hr_relaxation(instance: MarketInstance, use_lower: bool = False) -> MarketInstance:
    """The HR instance with quotas (0, u_h), or (0, l_h) when ``use_lower``."""
    quotas = HrQuotas.from_instance(instance)
    caps = quotas.lower if use_lower else quotas.upper
    return replace(instance, quotas={h: IntervalQuota(0, caps[h]) for h in instance.hospitals})


def stable_hr(instance: MarketInstance) -> Matching:
    """Stable matching of the instance read as plain HR with upper quotas."""
    return gale_shapley(instance, HrQuotas.from_instance(instance).upper)


def ef_hrlq(instance: MarketInstance) -> Matching | NoEnvyFreeMatching:
    """Envy-free matching of an HR-LQ instance, or the verdict that none exists.

    Runs deferred acceptance with every hospital's capacity set to its lower
    quota; the result works exactly when every hospital is filled.
    """
    quotas = HrQuotas.from_instance(instance)
    matching = gale_shapley(instance, quotas.lower)
    deficits = {
        h: quotas.lower[h] - len(matching.doctors_at(h))
        for h in instance.hospitals
        if len(matching.doctors_at(h)) < quotas.lower[h]
    }
    if deficits:
        logger.debug("ef_hrlq: no envy-free matching, deficits %s", deficits)
        return NoEnvyFreeMatching(deficits)
    return matching
