"""Section-assignment flows for staffing quotas.

A staffing family is the set of doctor sets that can be spread over sections
within each section's bounds. Both the weight minimisation behind ``p`` and
the exact membership test reduce to a feasible circulation with lower bounds,
which networkx solves once the bounds are moved into node demands.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from typing import TYPE_CHECKING

import networkx as nx

if TYPE_CHECKING:
    from efmatch.quotas.base import Section

_SOURCE = ("source",)
_SINK = ("sink",)


class _Circulation:
    """A circulation network whose edges may carry lower bounds."""

    def __init__(self) -> None:
        self.graph = nx.DiGraph()
        self.demand: dict[object, int] = {}
        self.fixed_cost = 0

    def add_edge(
        self, u: object, v: object, lower: int, upper: int | None, cost: int = 0
    ) -> None:
        attrs: dict[str, int] = {"weight": cost}
        if upper is not None:
            attrs["capacity"] = upper - lower
        self.graph.add_edge(u, v, **attrs)
        if lower:
            self.demand[u] = self.demand.get(u, 0) + lower
            self.demand[v] = self.demand.get(v, 0) - lower
            self.fixed_cost += lower * cost

    def min_cost(self) -> int | None:
        for node in self.graph.nodes:
            self.graph.nodes[node]["demand"] = self.demand.get(node, 0)
        try:
            flow = nx.min_cost_flow(self.graph)
        except nx.NetworkXUnfeasible:
            return None
        return int(nx.cost_of_flow(self.graph, flow)) + self.fixed_cost


def staffing_min_weight(
    sections: Iterable[Section],
    weights: Mapping[str, int],
    *,
    exact: frozenset[str] | None = None,
    total_upper: int | None = None,
) -> int | None:
    """Minimum total weight of a chosen doctor set that admits a section assignment.

    Candidates are the keys of ``weights``. With ``exact`` the chosen set is
    forced to be exactly that set. Returns None when no assignment exists.
    """
    net = _Circulation()
    candidates = set(weights) if exact is None else set(exact)
    reached: set[str] = set()
    for section in sections:
        node = ("section", section.name)
        net.add_edge(_SOURCE, node, section.lower, section.upper)
        for doctor in sorted(section.accepts & candidates):
            net.add_edge(node, ("doctor", doctor), 0, 1)
            reached.add(doctor)
    if exact is not None and not exact <= reached:
        return None
    for doctor in sorted(reached):
        lower = 1 if exact is not None else 0
        net.add_edge(("doctor", doctor), _SINK, lower, 1, weights.get(doctor, 0))
    net.add_edge(_SINK, _SOURCE, 0, total_upper)
    return net.min_cost()


def staffing_admits(
    sections: Iterable[Section],
    chosen: frozenset[str],
    total_upper: int | None = None,
) -> bool:
    if total_upper is not None and len(chosen) > total_upper:
        return False
    value = staffing_min_weight(
        sections, dict.fromkeys(chosen, 0), exact=chosen, total_upper=total_upper
    )
    return value is not None
