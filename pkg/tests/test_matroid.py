import itertools

import numpy as np
import pytest

from efmatch.generate import make_rng, random_laminar, random_staffing
from efmatch.matroid import (
    MAX_EXHAUSTIVE,
    OrderedGround,
    RankOracle,
    choose,
    complement,
    enumerate_family,
    quota_pair_from_family,
    validate_exchange,
    validate_paramodular,
    validate_rank,
)
from efmatch.quotas.compilers import CompiledQuota, compile_quota


def _subsets(ground):
    elements = sorted(ground)
    for size in range(len(elements) + 1):
        for combo in itertools.combinations(elements, size):
            yield frozenset(combo)


def _interval_pair(lower, upper, size):
    def p(subset):
        return max(0, lower - (size - len(subset)))

    def q(subset):
        return min(upper, len(subset))

    return p, q


def test_ordered_ground_prefixes():
    order = OrderedGround(("e1", "e2", "e3"))
    assert order.prefix(0) == frozenset()
    assert order.prefix(2) == {"e1", "e2"}
    assert order.prefix(3) == order.members
    with pytest.raises(ValueError):
        OrderedGround(("e1", "e1"))


def test_rank_oracle_memoises_and_checks_ground():
    seen = []

    def evaluate(subset):
        seen.append(subset)
        return min(1, len(subset))

    rank = RankOracle({"a", "b"}, evaluate)
    assert rank({"a"}) == 1
    assert rank(frozenset({"a"})) == 1
    assert len(seen) == 1
    assert rank.calls == 1
    with pytest.raises(ValueError, match="outside ground"):
        rank({"z"})


def test_complement_of_single_lower_quota():
    ground = frozenset({"a", "b", "c"})
    p, _ = _interval_pair(1, 3, 3)
    rank = complement(p, ground)
    for subset in _subsets(ground):
        assert rank(subset) == min(1, len(subset))


def test_complement_of_zero_is_zero():
    ground = frozenset({"a", "b", "c"})
    rank = complement(lambda subset: 0, ground)
    assert all(rank(subset) == 0 for subset in _subsets(ground))


def test_choose_uniform_rank_two():
    order = OrderedGround(("e1", "e2", "e3"))
    rank = RankOracle(order.members, lambda subset: min(2, len(subset)))
    assert choose(order, rank, order.members) == {"e1", "e2"}
    assert choose(order, rank, ()) == frozenset()


def test_choose_rejects_outside_elements_and_bad_rank():
    order = OrderedGround(("e1", "e2"))
    rank = RankOracle(order.members, lambda subset: 2 * len(subset))
    with pytest.raises(ValueError, match="outside ground"):
        choose(order, rank, {"e9"})
    with pytest.raises(ValueError, match="not supermodular"):
        choose(order, rank, {"e1"})


def test_choose_queries_rank_once_per_chosen_element():
    order = OrderedGround(tuple(f"e{i}" for i in range(6)))
    rank = RankOracle(order.members, lambda subset: min(3, len(subset)))
    choose(order, rank, {"e1", "e3", "e5"})
    assert rank.calls <= 3


@pytest.mark.parametrize("size", range(9))
def test_interval_pairs_are_paramodular(size):
    ground = frozenset(f"a{i}" for i in range(size))
    for upper in range(size + 1):
        for lower in range(upper + 1):
            p, q = _interval_pair(lower, upper, size)
            assert validate_paramodular(p, q, ground)


def test_free_matroid_pair_is_paramodular():
    assert validate_paramodular(lambda b: 0, len, frozenset("abcd"))


def test_non_supermodular_lower_quota_is_reported():
    ground = frozenset({"a", "b"})
    result = validate_paramodular(lambda b: 1 if b else 0, len, ground)
    assert not result
    assert result.reason == "p is not supermodular"
    assert len(result.witness) == 2


def test_validate_paramodular_refuses_large_grounds():
    ground = frozenset(f"a{i}" for i in range(MAX_EXHAUSTIVE + 1))
    result = validate_paramodular(lambda b: 0, len, ground)
    assert not result
    assert not result.checkable
    assert "not checkable exhaustively" in result.reason


def test_validate_rank_accepts_uniform_and_rejects_non_monotone():
    ground = frozenset("abcde")
    assert validate_rank(lambda b: min(2, len(b)), ground)
    result = validate_rank(lambda b: 1 if len(b) == 1 else 0, ground)
    assert not result


def test_validate_rank_samples_large_grounds():
    ground = frozenset(f"a{i}" for i in range(20))
    assert validate_rank(lambda b: min(4, len(b)), ground, samples=200, rng=make_rng(0))
    bad = validate_rank(lambda b: len(b) % 3, ground, samples=200, rng=make_rng(0))
    assert not bad


def test_gadget_family_fails_exchange():
    positive, negative = frozenset({"p1", "p2"}), frozenset({"n1", "n2"})
    result = validate_exchange([positive, negative])
    assert not result
    x, y, e = result.witness
    assert e in x - y


def test_interval_family_satisfies_exchange():
    ground = frozenset("abcd")
    family = enumerate_family(ground, lambda x: 1 <= len(x) <= 3)
    assert validate_exchange(family)


def test_exchange_and_pair_refuse_empty_family():
    with pytest.raises(ValueError):
        validate_exchange([])
    with pytest.raises(ValueError):
        quota_pair_from_family([])


def test_pair_of_empty_set_family_is_zero():
    p, q = quota_pair_from_family([frozenset()])
    assert p(frozenset("ab")) == 0
    assert q(frozenset("ab")) == 0


def test_pair_of_interval_family_matches_closed_forms():
    ground = frozenset("abc")
    pair = quota_pair_from_family(enumerate_family(ground, lambda x: 1 <= len(x) <= 2))
    p, q = _interval_pair(1, 2, 3)
    for subset in _subsets(ground):
        assert pair.p(subset) == p(subset)
        assert pair.q(subset) == q(subset)


def test_enumerate_family_refuses_large_grounds():
    with pytest.raises(ValueError):
        enumerate_family(frozenset(f"a{i}" for i in range(MAX_EXHAUSTIVE + 1)), bool)


def _random_matroid(rng: np.random.Generator):
    """A random matroid on at most 8 elements as (ordered ground, rank oracle)."""
    kind = int(rng.integers(0, 4))
    if kind in (2, 3):
        make = random_laminar if kind == 2 else random_staffing
        instance = make(rng, doctors=int(rng.integers(1, 8)), hospitals=1, density=1.0)
        ground = instance.acceptable_doctors("h1")
        compiled = compile_quota(instance.quotas["h1"], ground)
        if isinstance(compiled, CompiledQuota):
            return OrderedGround(instance.hospital_prefs["h1"]), compiled.rank
        kind = 0
    elements = tuple(f"e{i}" for i in rng.permutation(int(rng.integers(1, 9))))
    ground = frozenset(elements)
    if kind == 0:
        k = int(rng.integers(0, len(elements) + 1))
        return OrderedGround(elements), RankOracle(ground, lambda b: min(k, len(b)))
    block_of = {e: int(rng.integers(0, 3)) for e in elements}
    caps = [int(c) for c in rng.integers(0, 3, size=3)]

    def partition_rank(subset):
        return sum(min(caps[i], sum(1 for e in subset if block_of[e] == i)) for i in range(3))

    return OrderedGround(elements), RankOracle(ground, partition_rank)


def _random_subset(rng, ground, within=None):
    pool = sorted(ground if within is None else within)
    return frozenset(e for e in pool if rng.random() < 0.5)


def _independent(rank, subset):
    return rank(subset) == len(subset)


def _check_choice_properties(rng: np.random.Generator) -> None:
    order, rank = _random_matroid(rng)
    ground = order.members
    x = _random_subset(rng, ground)
    y = x | _random_subset(rng, ground)
    cx, cy = choose(order, rank, x), choose(order, rank, y)

    assert cx <= x
    assert _independent(rank, cx)
    assert len(cx) == rank(x)
    for j in range(len(order) + 1):
        assert len(cx & order.prefix(j)) == rank(order.prefix(j) & x)
    assert x - cx <= y - cy
    assert len(cx) <= len(cy)

    position = {e: i for i, e in enumerate(order)}
    for e in x - cx:
        assert not _independent(rank, cx | {e})
        for kept in cx:
            if position[e] < position[kept]:
                assert not _independent(rank, (cx - {kept}) | {e})


def test_choice_function_properties():
    rng = make_rng(2024)
    for _ in range(1000):
        _check_choice_properties(rng)


@pytest.mark.integration
def test_choice_function_properties_at_scale():
    rng = make_rng(7)
    for _ in range(10_000):
        _check_choice_properties(rng)
