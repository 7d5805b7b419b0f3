import itertools

import pytest

from efmatch.core import (
    MarketInstance,
    Matching,
    NoEnvyFreeMatching,
    find_blocking_pairs,
    find_justified_envy,
    is_feasible,
)
from efmatch.errors import QuotaError
from efmatch.generate import complete_hrlq, make_rng, random_hrlq
from efmatch.oracle import exists_envy_free
from efmatch.quotas.base import ClassBound, IntervalQuota, LaminarQuota
from efmatch.solvers.hr import HrQuotas, ef_hrlq, gale_shapley, hr_relaxation, stable_hr


def test_deadlock_with_lower_capacities(deadlock):
    matching = gale_shapley(deadlock, {"h1": 1, "h2": 1})
    assert matching == Matching.from_pairs([("d2", "h1")])


def test_empty_edge_set():
    instance = MarketInstance.from_preferences(
        {"d1": []}, {"h1": []}, {"h1": IntervalQuota(0, 0)}
    )
    assert len(gale_shapley(instance)) == 0


def test_single_pair():
    instance = MarketInstance.from_preferences(
        {"d1": ["h1"]}, {"h1": ["d1"]}, {"h1": IntervalQuota(0, 1)}
    )
    assert gale_shapley(instance) == Matching.from_pairs([("d1", "h1")])


def test_deadlock_has_no_envy_free_matching(deadlock):
    result = ef_hrlq(deadlock)
    assert isinstance(result, NoEnvyFreeMatching)
    assert result.deficits == {"h2": 1}


def test_zero_lower_quotas_give_empty_matching(zero_lower):
    assert ef_hrlq(zero_lower) == Matching()


def test_non_interval_quota_is_rejected():
    instance = MarketInstance.from_preferences(
        {"d1": ["h1"]},
        {"h1": ["d1"]},
        {"h1": LaminarQuota((ClassBound(frozenset({"d1"}), 0, 1),))},
    )
    with pytest.raises(QuotaError, match="interval"):
        HrQuotas.from_instance(instance)
    with pytest.raises(QuotaError):
        ef_hrlq(instance)


def test_hr_relaxation_drops_lower_quotas(deadlock):
    relaxed = hr_relaxation(deadlock)
    assert relaxed.quotas == {"h1": IntervalQuota(0, 2), "h2": IntervalQuota(0, 2)}
    assert hr_relaxation(deadlock, use_lower=True).quotas["h1"] == IntervalQuota(0, 1)


def test_stable_hr_has_no_blocking_pairs():
    for seed in range(200):
        instance = random_hrlq(make_rng(seed), doctors=6, hospitals=3, density=0.6)
        matching = stable_hr(instance)
        assert find_blocking_pairs(hr_relaxation(instance), matching) == []


def _check_proposal_orders(instances: int, orders: int) -> None:
    for seed in range(instances):
        rng = make_rng(seed)
        instance = random_hrlq(rng, doctors=6, hospitals=3, density=0.6)
        expected = stable_hr(instance).counts(instance.hospitals)
        for _ in range(orders):
            order = [str(d) for d in rng.permutation(list(instance.doctors))]
            matching = gale_shapley(instance, order=order)
            assert matching.counts(instance.hospitals) == expected


def test_hospital_counts_do_not_depend_on_proposal_order():
    _check_proposal_orders(200, 5)


@pytest.mark.integration
def test_hospital_counts_do_not_depend_on_proposal_order_at_scale():
    _check_proposal_orders(1000, 10)


def _check_complete_markets(count: int) -> None:
    for seed in range(count):
        instance = complete_hrlq(make_rng(seed), doctors=5, hospitals=3)
        assert isinstance(ef_hrlq(instance), Matching)


def test_complete_markets_with_small_lower_quotas_are_solvable():
    _check_complete_markets(200)


@pytest.mark.integration
def test_complete_markets_with_small_lower_quotas_are_solvable_at_scale():
    _check_complete_markets(500)


def _check_against_oracle(instance: MarketInstance) -> None:
    result = ef_hrlq(instance)
    witness = exists_envy_free(instance)
    if isinstance(result, NoEnvyFreeMatching):
        assert witness is None
    else:
        assert witness is not None
        assert is_feasible(instance, result)
        assert find_justified_envy(instance, result) == []


def test_ef_hrlq_agrees_with_oracle_on_random_instances():
    for seed in range(300):
        rng = make_rng(seed)
        instance = random_hrlq(rng, doctors=4, hospitals=3, density=0.5)
        _check_against_oracle(instance)


def _patterned(edges: set[tuple[str, str]], bounds: dict[str, tuple[int, int]]) -> MarketInstance:
    doctors = ["d1", "d2", "d3"]
    hospitals = ["h1", "h2"]
    return MarketInstance.from_preferences(
        {d: [h for h in hospitals if (d, h) in edges] for d in doctors},
        {h: [d for d in reversed(doctors) if (d, h) in edges] for h in hospitals},
        {h: IntervalQuota(*bounds[h]) for h in hospitals},
    )


@pytest.mark.integration
def test_ef_hrlq_agrees_with_oracle_exhaustively():
    pairs = [(d, h) for d in ("d1", "d2", "d3") for h in ("h1", "h2")]
    for mask in range(1 << len(pairs)):
        edges = {p for i, p in enumerate(pairs) if mask >> i & 1}
        options = {}
        for h in ("h1", "h2"):
            size = sum(1 for _, other in edges if other == h)
            cap = min(2, size)
            options[h] = [(lo, hi) for hi in range(cap + 1) for lo in range(hi + 1)]
        for b1, b2 in itertools.product(options["h1"], options["h2"]):
            _check_against_oracle(_patterned(edges, {"h1": b1, "h2": b2}))


@pytest.mark.integration
def test_ef_hrlq_agrees_with_oracle_at_scale():
    for seed in range(5000):
        rng = make_rng(seed)
        instance = random_hrlq(rng, doctors=5, hospitals=4, density=0.5)
        if len(instance.edges) <= 20:
            _check_against_oracle(instance)
