"""Compile quota specifications into lower-quota evaluators.

The fixed-point solver only needs ``p(B)``, the fewest doctors of ``B`` any
acceptable set must contain, plus a membership test for the acceptable
family. Each quota shape gets its own evaluator: a closed form for
intervals, a dynamic program over the class forest for laminar quotas, a
min-cost circulation for staffing quotas, and a table for small explicit
families.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import TYPE_CHECKING

import networkx as nx
import numpy as np

from efmatch.errors import NotLaminarError, QuotaCompileError, QuotaError
from efmatch.matroid import (
    MAX_EXHAUSTIVE,
    RankOracle,
    complement,
    enumerate_family,
    quota_pair_from_family,
    validate_exchange,
    validate_paramodular,
)
from efmatch.quotas.base import (
    ClassBound,
    ExplicitQuota,
    IntervalQuota,
    LaminarQuota,
    QuotaSpec,
    Section,
    StaffingQuota,
    admits,
    laminar_witness,
    quota_violations,
)
from efmatch.quotas.flow import staffing_min_weight

if TYPE_CHECKING:
    from efmatch.core import MarketInstance

logger = logging.getLogger(__name__)

_CACHE_SIZE = 4096


@dataclass(frozen=True)
class CompiledQuota:
    """Evaluators for one hospital's quota over its acceptable doctors."""

    kind: str
    ground: frozenset[str]
    p_eval: Callable[[frozenset[str]], int] = field(repr=False)
    member: Callable[[frozenset[str]], bool] = field(repr=False)
    p_total: int
    q_eval: Callable[[frozenset[str]], int] | None = field(default=None, repr=False)
    # p(B) as a function of |A - B|, when p only depends on cardinality.
    p_by_missing: Callable[[int], int] | None = field(default=None, repr=False)

    @cached_property
    def rank(self) -> RankOracle:
        return complement(self.p_eval, self.ground)


@dataclass(frozen=True)
class Infeasible:
    """The acceptable family is empty."""

    reason: str

    def __str__(self) -> str:
        return f"infeasible: {self.reason}"


@dataclass(frozen=True)
class NotParamodular:
    """The acceptable family is not a generalized matroid."""

    reason: str
    witness: tuple[object, ...] = ()

    def __str__(self) -> str:
        return f"not paramodular: {self.reason}"


CompileOutcome = CompiledQuota | Infeasible | NotParamodular


def _check(spec: QuotaSpec, ground: frozenset[str]) -> None:
    problems = quota_violations(spec, ground)
    if problems:
        raise QuotaError("; ".join(problems))


def compile_interval(lower: int, upper: int, ground: frozenset[str]) -> CompiledQuota:
    _check(IntervalQuota(lower, upper), ground)
    size = len(ground)

    def p_by_missing(missing: int) -> int:
        return max(0, lower - missing)

    return CompiledQuota(
        kind="interval",
        ground=ground,
        p_eval=lambda subset: p_by_missing(size - len(subset)),
        member=lambda chosen: chosen <= ground and lower <= len(chosen) <= upper,
        p_total=lower,
        q_eval=lambda subset: min(upper, len(subset)),
        p_by_missing=p_by_missing,
    )


class _LaminarForest:
    """The class forest of a laminar quota, rooted at the whole ground set."""

    ROOT = "root"

    def __init__(self, classes: tuple[ClassBound, ...], ground: frozenset[str]) -> None:
        merged: dict[frozenset[str], tuple[int, int]] = {ground: (0, len(ground))}
        for bound in classes:
            if not bound.members:
                continue
            lo, hi = merged.get(bound.members, (0, len(bound.members)))
            merged[bound.members] = (max(lo, bound.lower), min(hi, bound.upper))

        self.members: dict[object, frozenset[str]] = {self.ROOT: ground}
        self.bounds: dict[object, tuple[int, int]] = {self.ROOT: merged.pop(ground)}
        nodes = sorted(merged, key=len)
        for i, members in enumerate(nodes):
            self.members[i] = members
            self.bounds[i] = merged[members]

        self.tree = nx.DiGraph()
        self.tree.add_node(self.ROOT)
        for i, members in enumerate(nodes):
            parent: object = next(
                (j for j in range(i + 1, len(nodes)) if members < nodes[j]), self.ROOT
            )
            self.tree.add_edge(parent, i)

        self.free: dict[object, frozenset[str]] = {}
        for node, members in self.members.items():
            covered = frozenset().union(*(self.members[c] for c in self.tree.successors(node)))
            self.free[node] = members - covered

    def min_marked(self, marked: frozenset[str]) -> np.ndarray:
        """For each total t at the root, the fewest marked elements among t chosen.

        Entries are ``inf`` where no assignment satisfies the class bounds.
        """
        tables: dict[object, np.ndarray] = {}
        for node in nx.dfs_postorder_nodes(self.tree, self.ROOT):
            free = self.free[node]
            unmarked = len(free - marked)
            table = np.array(
                [max(0, j - unmarked) for j in range(len(free) + 1)], dtype=float
            )
            for child in self.tree.successors(node):
                table = _min_plus(table, tables.pop(child))
            lo, hi = self.bounds[node]
            table[:lo] = np.inf
            table[hi + 1 :] = np.inf
            tables[node] = table
        return tables[self.ROOT]


def _min_plus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.full(len(a) + len(b) - 1, np.inf)
    for i in np.flatnonzero(np.isfinite(a)):
        np.minimum(out[i : i + len(b)], a[i] + b, out=out[i : i + len(b)])
    return out


def compile_laminar(
    classes: tuple[ClassBound, ...], ground: frozenset[str]
) -> CompiledQuota | Infeasible:
    witness = laminar_witness(classes)
    if witness is not None:
        raise NotLaminarError(*witness)
    _check(LaminarQuota(classes), ground)
    forest = _LaminarForest(classes, ground)

    if not np.isfinite(forest.min_marked(frozenset())).any():
        return Infeasible("no set satisfies every class bound")

    @lru_cache(maxsize=_CACHE_SIZE)
    def p_eval(subset: frozenset[str]) -> int:
        return int(forest.min_marked(subset).min())

    @lru_cache(maxsize=_CACHE_SIZE)
    def q_eval(subset: frozenset[str]) -> int:
        table = forest.min_marked(ground - subset)
        totals = np.arange(len(table))
        finite = np.isfinite(table)
        return int((totals[finite] - table[finite]).max())

    spec = LaminarQuota(classes)
    return CompiledQuota(
        kind="laminar",
        ground=ground,
        p_eval=p_eval,
        member=lambda chosen: admits(spec, ground, chosen),
        p_total=p_eval(ground),
        q_eval=q_eval,
    )


def compile_staffing(
    sections: tuple[Section, ...],
    ground: frozenset[str],
    total_upper: int | None = None,
) -> CompiledQuota | Infeasible:
    spec = StaffingQuota(sections, total_upper)
    _check(spec, ground)

    def weighted(subset: frozenset[str], sign: int) -> int | None:
        weights = {d: sign if d in subset else 0 for d in ground}
        return staffing_min_weight(sections, weights, total_upper=total_upper)

    if weighted(frozenset(), 1) is None:
        return Infeasible("no assignment of doctors to sections meets the section bounds")

    @lru_cache(maxsize=_CACHE_SIZE)
    def p_eval(subset: frozenset[str]) -> int:
        value = weighted(subset, 1)
        assert value is not None
        return value

    @lru_cache(maxsize=_CACHE_SIZE)
    def q_eval(subset: frozenset[str]) -> int:
        value = weighted(subset, -1)
        assert value is not None
        return -value

    return CompiledQuota(
        kind="staffing",
        ground=ground,
        p_eval=p_eval,
        member=lambda chosen: admits(spec, ground, chosen),
        p_total=p_eval(ground),
        q_eval=q_eval,
    )


def compile_explicit(
    constraints: tuple[ClassBound, ...], ground: frozenset[str]
) -> CompileOutcome:
    spec = ExplicitQuota(constraints)
    _check(spec, ground)
    if len(ground) > MAX_EXHAUSTIVE:
        raise QuotaError(
            f"explicit quotas need |A(h)| <= {MAX_EXHAUSTIVE}, got {len(ground)}"
        )
    family = enumerate_family(ground, lambda chosen: admits(spec, ground, chosen))
    if not family:
        return Infeasible("no set satisfies every constraint")
    exchange = validate_exchange(family)
    if not exchange:
        return NotParamodular(exchange.reason, exchange.witness)
    pair = quota_pair_from_family(family)
    check = validate_paramodular(pair.p, pair.q, ground)
    if not check:
        return NotParamodular(check.reason, check.witness)

    elements = tuple(sorted(ground))
    index = {e: i for i, e in enumerate(elements)}
    size = 1 << len(elements)
    p_table = np.empty(size, dtype=np.int64)
    q_table = np.empty(size, dtype=np.int64)
    for mask in range(size):
        subset = frozenset(e for i, e in enumerate(elements) if mask >> i & 1)
        p_table[mask] = pair.p(subset)
        q_table[mask] = pair.q(subset)

    def lookup(table: np.ndarray) -> Callable[[frozenset[str]], int]:
        def evaluate(subset: frozenset[str]) -> int:
            return int(table[sum(1 << index[e] for e in subset)])

        return evaluate

    members = frozenset(family)
    return CompiledQuota(
        kind="explicit",
        ground=ground,
        p_eval=lookup(p_table),
        member=lambda chosen: chosen in members,
        p_total=int(p_table[size - 1]),
        q_eval=lookup(q_table),
    )


def compile_quota(spec: QuotaSpec, ground: frozenset[str]) -> CompileOutcome:
    match spec:
        case IntervalQuota(lower=lower, upper=upper):
            return compile_interval(lower, upper, ground)
        case LaminarQuota(classes=classes):
            return compile_laminar(classes, ground)
        case StaffingQuota(sections=sections, total_upper=total_upper):
            return compile_staffing(sections, ground, total_upper)
        case ExplicitQuota(constraints=constraints):
            return compile_explicit(constraints, ground)
    raise TypeError(f"unknown quota type: {type(spec).__name__}")


def compile_instance(instance: MarketInstance) -> Mapping[str, CompiledQuota]:
    """Compile every hospital's quota, raising on the first unusable one."""
    compiled: dict[str, CompiledQuota] = {}
    for hospital in instance.hospitals:
        outcome = compile_quota(
            instance.quotas[hospital], instance.acceptable_doctors(hospital)
        )
        if not isinstance(outcome, CompiledQuota):
            raise QuotaCompileError(hospital, outcome)
        logger.debug(
            "compiled %s quota of %s: p(A)=%d", outcome.kind, hospital, outcome.p_total
        )
        compiled[hospital] = outcome
    return compiled
