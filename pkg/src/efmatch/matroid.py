"""Matroid rank oracles, induced choice functions and g-matroid validators.

A hospital's lower-quota function ``p`` is turned into the rank function
``r(B) = p(A) - p(A - B)`` of a matroid on its acceptable doctors. Walking the
hospital's preference order and keeping every doctor that raises the rank of
the prefix gives the choice function the fixed-point solver runs on.

The validators here enumerate every subset of the ground set and are only
meant for small grounds in tests and in the explicit-quota compiler.
"""

from __future__ import annotations

import threading
from collections.abc import Callable, Collection, Iterable, Iterator, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

SetFunction = Callable[[frozenset[str]], int]

# Beyond this many elements exhaustive validation is refused.
MAX_EXHAUSTIVE = 14
MAX_RANK_EXHAUSTIVE = 12
_MEMO_LIMIT = 64


@dataclass(frozen=True)
class OrderedGround:
    """Elements ``e_1 > e_2 > ... > e_n`` of a ground set, best first."""

    elements: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.elements)) != len(self.elements):
            raise ValueError("ordered ground has repeated elements")

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[str]:
        return iter(self.elements)

    def prefix(self, i: int) -> frozenset[str]:
        """The set A_i of the i best elements (A_0 is empty)."""
        return frozenset(self.elements[:i])

    @property
    def members(self) -> frozenset[str]:
        return frozenset(self.elements)


class RankOracle:
    """A rank function on ``ground``, memoised per subset bitmask.

    Grounds of more than 64 elements are evaluated without caching. The cache
    is guarded by a lock so concurrent ``choose`` calls on one oracle agree.
    """

    def __init__(self, ground: Iterable[str], evaluate: SetFunction) -> None:
        self.ground = tuple(sorted(ground))
        self._index = {e: i for i, e in enumerate(self.ground)}
        self._evaluate = evaluate
        self._cache: dict[int, int] = {}
        self._lock = threading.Lock()
        self.calls = 0

    def _mask(self, subset: Iterable[str]) -> int:
        mask = 0
        for e in subset:
            mask |= 1 << self._index[e]
        return mask

    def __call__(self, subset: Iterable[str]) -> int:
        chosen = frozenset(subset)
        outside = chosen - self._index.keys()
        if outside:
            raise ValueError(f"elements outside ground: {sorted(outside)}")
        if len(self.ground) > _MEMO_LIMIT:
            self.calls += 1
            return self._evaluate(chosen)
        key = self._mask(chosen)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = self._evaluate(chosen)
        with self._lock:
            self.calls += 1
            self._cache[key] = value
        return value


def complement(p: SetFunction, ground: Collection[str]) -> RankOracle:
    """The rank oracle ``B -> p(A) - p(A - B)`` of a supermodular ``p``."""
    full = frozenset(ground)
    total = p(full)
    return RankOracle(full, lambda subset: total - p(full - subset))


def choose(order: OrderedGround, rank: RankOracle, subset: Iterable[str]) -> frozenset[str]:
    """Induced choice: keep each element whose prefix raises the rank.

    Elements outside ``subset`` leave ``r(A_i & X)`` unchanged, so the rank is
    only queried once per element of ``subset``.
    """
    chosen = frozenset(subset)
    outside = chosen - order.members
    if outside:
        raise ValueError(f"elements outside ground: {sorted(outside)}")
    kept: list[str] = []
    prefix: set[str] = set()
    previous = 0
    for element in order:
        if element not in chosen:
            continue
        prefix.add(element)
        value = rank(frozenset(prefix))
        gain = value - previous
        if gain not in (0, 1):
            raise ValueError(
                f"rank rises by {gain} at {element!r}; the lower quota is not supermodular"
            )
        if gain:
            kept.append(element)
        previous = value
    return frozenset(kept)


@dataclass(frozen=True)
class CheckResult:
    """Outcome of an exhaustive validator; ``witness`` names a violating case."""

    ok: bool
    reason: str = ""
    witness: tuple[object, ...] = ()
    checkable: bool = True

    def __bool__(self) -> bool:
        return self.ok


class QuotaPair(NamedTuple):
    p: SetFunction
    q: SetFunction


def _subset(elements: Sequence[str], mask: int) -> frozenset[str]:
    return frozenset(e for i, e in enumerate(elements) if mask >> i & 1)


def _tabulate(fn: SetFunction, elements: Sequence[str]) -> np.ndarray:
    size = 1 << len(elements)
    return np.fromiter(
        (fn(_subset(elements, mask)) for mask in range(size)), dtype=np.int64, count=size
    )


def _cardinalities(n: int) -> np.ndarray:
    masks = np.arange(1 << n, dtype=np.int64)
    sizes = np.zeros_like(masks)
    for i in range(n):
        sizes += (masks >> i) & 1
    return sizes


def _too_large(n: int, limit: int) -> CheckResult:
    return CheckResult(
        ok=False,
        reason=f"not checkable exhaustively: ground has {n} elements (limit {limit})",
        checkable=False,
    )


def validate_paramodular(p: SetFunction, q: SetFunction, ground: Collection[str]) -> CheckResult:
    """Check bounds, supermodular ``p``, submodular ``q`` and the cross-inequality."""
    elements = tuple(sorted(ground))
    n = len(elements)
    if n > MAX_EXHAUSTIVE:
        return _too_large(n, MAX_EXHAUSTIVE)
    p_tab = _tabulate(p, elements)
    q_tab = _tabulate(q, elements)
    sizes = _cardinalities(n)
    masks = np.arange(1 << n, dtype=np.int64)

    for label, bad in (
        ("p(B) < 0", p_tab < 0),
        ("p(B) > q(B)", p_tab > q_tab),
        ("q(B) > |B|", q_tab > sizes),
    ):
        if bad.any():
            b = int(np.argmax(bad))
            return CheckResult(False, label, (_subset(elements, b),))

    for b in range(1 << n):
        union = masks | b
        inter = masks & b
        checks = (
            ("p is not supermodular", p_tab[b] + p_tab > p_tab[union] + p_tab[inter]),
            ("q is not submodular", q_tab[b] + q_tab < q_tab[union] + q_tab[inter]),
            (
                "cross-inequality q(B) - p(B') >= q(B - B') - p(B' - B) fails",
                q_tab[b] - p_tab < q_tab[b & ~masks] - p_tab[masks & ~b],
            ),
        )
        for reason, bad in checks:
            if bad.any():
                other = int(np.argmax(bad))
                return CheckResult(
                    False, reason, (_subset(elements, b), _subset(elements, other))
                )
    return CheckResult(True)


def validate_rank(
    rank: SetFunction,
    ground: Collection[str],
    *,
    samples: int = 2000,
    rng: np.random.Generator | None = None,
) -> CheckResult:
    """Check that ``rank`` is a matroid rank function.

    Grounds up to ``MAX_RANK_EXHAUSTIVE`` elements are checked on every pair of
    subsets; larger ones on ``samples`` random pairs.
    """
    elements = tuple(sorted(ground))
    n = len(elements)

    def violation(x: frozenset[str], y: frozenset[str]) -> str | None:
        rx, ry = rank(x), rank(y)
        if not 0 <= rx <= len(x):
            return "r(B) outside [0, |B|]"
        if x <= y and rx > ry:
            return "r is not monotone"
        if rx + ry < rank(x | y) + rank(x & y):
            return "r is not submodular"
        return None

    if n <= MAX_RANK_EXHAUSTIVE:
        r_tab = _tabulate(rank, elements)
        sizes = _cardinalities(n)
        bad = (r_tab < 0) | (r_tab > sizes)
        if bad.any():
            return CheckResult(False, "r(B) outside [0, |B|]", (_subset(elements, int(np.argmax(bad))),))
        masks = np.arange(1 << n, dtype=np.int64)
        for b in range(1 << n):
            union = masks | b
            inter = masks & b
            supersets = (masks & b) == b
            for reason, bad in (
                ("r is not monotone", supersets & (r_tab[b] > r_tab)),
                ("r is not submodular", r_tab[b] + r_tab < r_tab[union] + r_tab[inter]),
            ):
                if bad.any():
                    other = int(np.argmax(bad))
                    return CheckResult(
                        False, reason, (_subset(elements, b), _subset(elements, other))
                    )
        return CheckResult(True)

    rng = rng if rng is not None else np.random.default_rng()
    for _ in range(samples):
        picks = rng.random((2, n)) < 0.5
        x = frozenset(e for e, keep in zip(elements, picks[0]) if keep)
        y = frozenset(e for e, keep in zip(elements, picks[1]) if keep)
        for first, second in ((x, y), (x & y, x)):
            reason = violation(first, second)
            if reason is not None:
                return CheckResult(False, reason, (first, second))
    return CheckResult(True)


def enumerate_family(
    ground: Collection[str], member: Callable[[frozenset[str]], bool]
) -> list[frozenset[str]]:
    """Every subset of ``ground`` accepted by ``member``."""
    elements = tuple(sorted(ground))
    if len(elements) > MAX_EXHAUSTIVE:
        raise ValueError(
            f"cannot enumerate subsets of a {len(elements)}-element ground (limit {MAX_EXHAUSTIVE})"
        )
    family = (_subset(elements, mask) for mask in range(1 << len(elements)))
    return [x for x in family if member(x)]


def validate_exchange(family: Iterable[frozenset[str]]) -> CheckResult:
    """Check the simultaneous exchange property of a set family.

    For all X, Y in the family and e in X - Y, either X - e and Y + e are both
    in the family, or some e' in Y - X has X - e + e' and Y + e - e' in it.
    """
    members = {frozenset(x) for x in family}
    if not members:
        raise ValueError("exchange property is undefined for an empty family")
    for x in members:
        for y in members:
            for e in sorted(x - y):
                if x - {e} in members and y | {e} in members:
                    continue
                if any(
                    (x - {e}) | {f} in members and (y | {e}) - {f} in members
                    for f in y - x
                ):
                    continue
                return CheckResult(False, "exchange property fails", (x, y, e))
    return CheckResult(True)


def quota_pair_from_family(family: Iterable[frozenset[str]]) -> QuotaPair:
    """The pair p(B) = min |X & B| and q(B) = max |X & B| over the family."""
    members = [frozenset(x) for x in family]
    if not members:
        raise ValueError("quota pair is undefined for an empty family")

    def p(subset: frozenset[str]) -> int:
        return min(len(x & subset) for x in members)

    def q(subset: frozenset[str]) -> int:
        return max(len(x & subset) for x in members)

    return QuotaPair(p, q)
