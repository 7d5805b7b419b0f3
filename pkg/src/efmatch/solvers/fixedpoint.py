"""Envy-free matchings for CSM with paramodular quotas via a monotone fixed point.

The state is a pair of edge sets ``(N_D, N_H)``: the pairs still open to
doctors and the pairs hospitals have been offered. Each step lets hospitals
reject from ``N_H`` and doctors reject from ``N_D`` using the choice
functions, starting from ``(E, {})``. At the fixed point ``N_D & N_H`` is a
stable matching of the market in which every hospital only wants sets
independent in the complement matroid of its lower quota; it is an envy-free
matching of the original market exactly when it fills every lower quota.

Edge sets are Python ints used as bitmasks over a fixed edge numbering.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import Literal

from efmatch.core import MarketInstance, Matching, NoEnvyFreeMatching, Pair
from efmatch.matroid import OrderedGround, choose
from efmatch.quotas.compilers import CompiledQuota, compile_instance

logger = logging.getLogger(__name__)

ChoiceMethod = Literal["rejection", "choose"]


class EdgeIndex:
    """Numbers the edges doctor by doctor, each doctor's list best first."""

    def __init__(self, instance: MarketInstance) -> None:
        self.edges: list[Pair] = []
        self.doctor_edges: dict[str, list[int]] = {}
        for doctor in instance.doctors:
            ids = []
            for hospital in instance.doctor_prefs.get(doctor, ()):
                ids.append(len(self.edges))
                self.edges.append((doctor, hospital))
            self.doctor_edges[doctor] = ids
        self.position = {edge: i for i, edge in enumerate(self.edges)}
        self.hospital_edges: dict[str, list[int]] = {
            h: [self.position[(d, h)] for d in instance.hospital_prefs.get(h, ())]
            for h in instance.hospitals
        }
        self.full = (1 << len(self.edges)) - 1

    def __len__(self) -> int:
        return len(self.edges)

    def mask(self, pairs: Iterable[Pair]) -> int:
        value = 0
        for pair in pairs:
            value |= 1 << self.position[pair]
        return value

    def pairs(self, mask: int) -> frozenset[Pair]:
        return frozenset(e for i, e in enumerate(self.edges) if mask >> i & 1)


@dataclass(frozen=True)
class ProposalState:
    """The pair ``(N_D, N_H)`` as edge bitmasks."""

    doctor_side: int
    hospital_side: int

    def dominates(self, other: ProposalState) -> bool:
        """``self >= other``: a larger doctor side and a smaller hospital side."""
        return (
            other.doctor_side & ~self.doctor_side == 0
            and self.hospital_side & ~other.hospital_side == 0
        )


@dataclass(frozen=True)
class FixedPointRun:
    state: ProposalState
    iterations: int


class FixedPointSolver:
    """Runs the fixed-point iteration over one instance with compiled quotas."""

    def __init__(
        self,
        instance: MarketInstance,
        compiled: Mapping[str, CompiledQuota] | None = None,
        *,
        method: ChoiceMethod = "rejection",
    ) -> None:
        self.instance = instance
        self.compiled = compile_instance(instance) if compiled is None else compiled
        self.index = EdgeIndex(instance)
        self.method = method
        self._orders = {
            h: OrderedGround(tuple(instance.hospital_prefs.get(h, ())))
            for h in instance.hospitals
        }

    @property
    def start(self) -> ProposalState:
        return ProposalState(self.index.full, 0)

    def joint_choice_doctors(self, mask: int) -> int:
        """Each doctor keeps the best hospital left in ``mask``."""
        chosen = 0
        for ids in self.index.doctor_edges.values():
            for i in ids:
                if mask >> i & 1:
                    chosen |= 1 << i
                    break
        return chosen

    def _reject_by_p(self, hospital: str, offered: list[int]) -> int:
        """Keep each offered doctor for whom p(A - prefix) drops when they join the prefix."""
        quota = self.compiled[hospital]
        ground = quota.ground
        fast = quota.p_by_missing
        chosen = 0
        above: set[str] = set()
        previous = fast(0) if fast is not None else quota.p_eval(ground)
        for i in offered:
            above.add(self.index.edges[i][0])
            if fast is not None:
                value = fast(len(above))
            else:
                value = quota.p_eval(ground - above)
            if value != previous:
                chosen |= 1 << i
            previous = value
        return chosen

    def _choose(self, hospital: str, offered: list[int]) -> int:
        doctors = {self.index.edges[i][0]: i for i in offered}
        kept = choose(self._orders[hospital], self.compiled[hospital].rank, doctors)
        chosen = 0
        for doctor in kept:
            chosen |= 1 << doctors[doctor]
        return chosen

    def joint_choice_hospitals(self, mask: int, method: ChoiceMethod | None = None) -> int:
        """Each hospital keeps the choice of its rank-oracle matroid from ``mask``."""
        pick = self._choose if (method or self.method) == "choose" else self._reject_by_p
        chosen = 0
        for hospital, ids in self.index.hospital_edges.items():
            offered = [i for i in ids if mask >> i & 1]
            if offered:
                chosen |= pick(hospital, offered)
        return chosen

    def step(self, state: ProposalState) -> ProposalState:
        full = self.index.full
        rejected_by_hospitals = state.hospital_side & ~self.joint_choice_hospitals(state.hospital_side)
        rejected_by_doctors = state.doctor_side & ~self.joint_choice_doctors(state.doctor_side)
        return ProposalState(full & ~rejected_by_hospitals, full & ~rejected_by_doctors)

    def run(self, start: ProposalState | None = None) -> FixedPointRun:
        """Iterate ``step`` until nothing changes.

        A monotone chain in this lattice has at most 2|E| strict steps; going
        past that means the quotas were not paramodular.
        """
        state = self.start if start is None else start
        bound = 2 * len(self.index)
        iterations = 0
        while True:
            following = self.step(state)
            if following == state:
                return FixedPointRun(state, iterations)
            iterations += 1
            if iterations > bound:
                raise RuntimeError(f"no fixed point after {bound} state changes")
            state = following

    def prefixpoint_from(self, matching: Matching) -> ProposalState:
        """A state that dominates its own step, built from an envy-free matching.

        ``N_D`` holds the matching plus every pair a doctor likes less than
        their assignment; ``N_H`` holds the matching plus every other pair.
        """
        matched = self.index.mask(matching.pairs)
        worse = 0
        for doctor, ids in self.index.doctor_edges.items():
            current = matching.hospital_of(doctor)
            if current is None:
                continue
            below = False
            for i in ids:
                if below:
                    worse |= 1 << i
                elif self.index.edges[i][1] == current:
                    below = True
        doctor_side = matched | worse
        return ProposalState(doctor_side, matched | (self.index.full & ~doctor_side))

    def matching_of(self, state: ProposalState) -> Matching:
        return Matching(self.index.pairs(state.doctor_side & state.hospital_side))

    def solve(self) -> Matching | NoEnvyFreeMatching:
        result = self.run()
        matching = self.matching_of(result.state)
        deficits = {
            h: quota.p_total - len(matching.doctors_at(h))
            for h, quota in self.compiled.items()
            if len(matching.doctors_at(h)) != quota.p_total
        }
        logger.debug(
            "fixed point after %d iterations over %d edges, %d pairs",
            result.iterations,
            len(self.index),
            len(matching),
        )
        if deficits:
            return NoEnvyFreeMatching(deficits)
        return matching


def solve(instance: MarketInstance) -> Matching | NoEnvyFreeMatching:
    """Envy-free matching of a CSM instance with paramodular quotas, if one exists.

    Raises ``QuotaCompileError`` when a quota is infeasible or not paramodular.
    """
    return FixedPointSolver(instance).solve()
