import itertools
import logging
import re

import pytest

from efmatch.errors import NotLaminarError, QuotaCompileError, QuotaError
from efmatch.generate import make_rng, random_laminar, random_staffing
from efmatch.matroid import (
    OrderedGround,
    choose,
    enumerate_family,
    quota_pair_from_family,
    validate_exchange,
    validate_paramodular,
)
from efmatch.oracle import Cnf3B2, reduce_sat
from efmatch.quotas.base import ClassBound, LaminarQuota, Section, StaffingQuota
from efmatch.quotas.compilers import (
    CompiledQuota,
    Infeasible,
    NotParamodular,
    compile_explicit,
    compile_instance,
    compile_interval,
    compile_laminar,
    compile_quota,
    compile_staffing,
)

ABC = frozenset("abc")


def _subsets(ground):
    elements = sorted(ground)
    for size in range(len(elements) + 1):
        for combo in itertools.combinations(elements, size):
            yield frozenset(combo)


def _ground(size):
    return frozenset(f"a{i}" for i in range(size))


def test_interval_lower_quota_closed_form():
    compiled = compile_interval(1, 2, ABC)
    assert compiled.p_eval(frozenset("ab")) == 0
    assert compiled.p_eval(ABC) == 1
    assert compiled.p_total == 1
    assert compiled.p_by_missing(0) == 1


def test_interval_without_lower_quota_has_zero_p():
    compiled = compile_interval(0, 2, ABC)
    assert all(compiled.p_eval(b) == 0 for b in _subsets(ABC))


@pytest.mark.parametrize("size", range(7))
def test_interval_family_is_the_cardinality_band(size):
    ground = _ground(size)
    for upper in range(size + 1):
        for lower in range(upper + 1):
            compiled = compile_interval(lower, upper, ground)
            family = enumerate_family(ground, compiled.member)
            assert family == [x for x in _subsets_sorted(ground) if lower <= len(x) <= upper]
            pair = quota_pair_from_family(family)
            for b in _subsets(ground):
                assert compiled.p_eval(b) == pair.p(b)
                assert compiled.q_eval(b) == pair.q(b)


def _subsets_sorted(ground):
    # Same order as enumerate_family: by bitmask over the sorted elements.
    elements = sorted(ground)
    for mask in range(1 << len(elements)):
        yield frozenset(e for i, e in enumerate(elements) if mask >> i & 1)


def test_interval_bound_violation():
    with pytest.raises(QuotaError, match=re.escape("u > |A(h)|")):
        compile_interval(0, 4, ABC)


def test_single_full_class_picks_witness_outside():
    compiled = compile_laminar((ClassBound(ABC, 1, 3),), ABC)
    assert isinstance(compiled, CompiledQuota)
    assert compiled.p_eval(frozenset("ab")) == 0
    assert compiled.p_eval(ABC) == 1


def test_no_classes_is_the_free_family():
    compiled = compile_laminar((), ABC)
    assert isinstance(compiled, CompiledQuota)
    assert all(compiled.p_eval(b) == 0 for b in _subsets(ABC))
    assert all(compiled.member(b) for b in _subsets(ABC))


@pytest.mark.parametrize("size", range(1, 7))
def test_one_class_laminar_matches_interval(size):
    ground = _ground(size)
    for upper in range(size + 1):
        for lower in range(upper + 1):
            laminar = compile_laminar((ClassBound(ground, lower, upper),), ground)
            interval = compile_interval(lower, upper, ground)
            for b in _subsets(ground):
                assert laminar.p_eval(b) == interval.p_eval(b)
                assert laminar.q_eval(b) == interval.q_eval(b)


def test_crossing_classes_are_rejected():
    classes = (ClassBound(frozenset("ab"), 0, 1), ClassBound(frozenset("bc"), 0, 1))
    with pytest.raises(NotLaminarError) as exc_info:
        compile_laminar(classes, ABC)
    assert set(exc_info.value.witness) == {frozenset("ab"), frozenset("bc")}


def test_unsatisfiable_laminar_bounds_are_infeasible():
    classes = (
        ClassBound(ABC, 0, 1),
        ClassBound(frozenset("a"), 1, 1),
        ClassBound(frozenset("b"), 1, 1),
    )
    outcome = compile_laminar(classes, ABC)
    assert isinstance(outcome, Infeasible)
    assert str(outcome).startswith("infeasible")


def test_single_section_matches_interval():
    for size in range(1, 7):
        ground = _ground(size)
        upper = min(2, size)
        staffing = compile_staffing((Section("s", ground, 1, upper),), ground)
        interval = compile_interval(1, upper, ground)
        for b in _subsets(ground):
            assert staffing.p_eval(b) == interval.p_eval(b)
            assert staffing.q_eval(b) == interval.q_eval(b)


def test_sections_without_lower_bounds_have_zero_p():
    sections = (Section("s1", frozenset("ab"), 0, 1), Section("s2", frozenset("bc"), 0, 2))
    compiled = compile_staffing(sections, ABC)
    assert all(compiled.p_eval(b) == 0 for b in _subsets(ABC))


def test_section_with_no_candidates_is_infeasible():
    outcome = compile_staffing((Section("s", frozenset(), 1, 1),), ABC)
    assert isinstance(outcome, Infeasible)


def test_staffing_total_upper_caps_q():
    compiled = compile_staffing((Section("s", ABC, 0, 3),), ABC, total_upper=2)
    assert compiled.q_eval(ABC) == 2
    assert not compiled.member(ABC)


def _assignable(sections, chosen, total_upper):
    """Brute force: some map of chosen doctors to accepting sections meets every bound."""
    if total_upper is not None and len(chosen) > total_upper:
        return False
    options = [[s for s in sections if d in s.accepts] for d in sorted(chosen)]
    for picks in itertools.product(*options):
        if all(s.lower <= picks.count(s) <= s.upper for s in sections):
            return True
    return False


def _oracle_agreement(compiled: CompiledQuota, member, ground):
    family = enumerate_family(ground, member)
    assert family == enumerate_family(ground, compiled.member)
    pair = quota_pair_from_family(family)
    for b in _subsets(ground):
        assert compiled.p_eval(b) == pair.p(b)
        assert compiled.q_eval(b) == pair.q(b)
    assert validate_paramodular(compiled.p_eval, pair.q, ground)
    assert validate_exchange(family)
    assert compiled.rank(ground) == compiled.p_total


def test_random_laminar_quotas_agree_with_enumeration():
    for seed in range(60):
        instance = random_laminar(make_rng(seed), doctors=6, hospitals=1, density=0.9)
        ground = instance.acceptable_doctors("h1")
        spec = instance.quotas["h1"]
        compiled = compile_quota(spec, ground)
        assert isinstance(compiled, CompiledQuota)
        _oracle_agreement(
            compiled,
            lambda x, s=spec: all(b.lower <= len(x & b.members) <= b.upper for b in s.classes),
            ground,
        )


def test_random_staffing_quotas_agree_with_enumeration():
    for seed in range(40):
        instance = random_staffing(make_rng(seed), doctors=5, hospitals=1, density=0.9)
        ground = instance.acceptable_doctors("h1")
        spec = instance.quotas["h1"]
        compiled = compile_quota(spec, ground)
        assert isinstance(compiled, CompiledQuota)
        _oracle_agreement(
            compiled,
            lambda x, s=spec: _assignable(s.sections, x, s.total_upper),
            ground,
        )


def _gadget_constraints():
    return tuple(
        ClassBound(frozenset({a, b}), 1, 1) for a in ("p1", "p2") for b in ("n1", "n2")
    )


def test_hardness_gadget_is_not_paramodular():
    outcome = compile_explicit(_gadget_constraints(), frozenset({"p1", "p2", "n1", "n2"}))
    assert isinstance(outcome, NotParamodular)
    assert outcome.witness
    assert "not paramodular" in str(outcome)


def test_empty_constraint_list_is_free():
    compiled = compile_explicit((), ABC)
    assert isinstance(compiled, CompiledQuota)
    for b in _subsets(ABC):
        assert compiled.p_eval(b) == 0
        assert compiled.q_eval(b) == len(b)


def test_explicit_full_set_constraint_matches_interval():
    for lower, upper in [(0, 0), (1, 2), (2, 3), (3, 3)]:
        explicit = compile_explicit((ClassBound(ABC, lower, upper),), ABC)
        interval = compile_interval(lower, upper, ABC)
        for b in _subsets(ABC):
            assert explicit.p_eval(b) == interval.p_eval(b)
            assert explicit.member(b) == interval.member(b)


def test_explicit_empty_family_is_infeasible():
    constraints = (ClassBound(frozenset("a"), 1, 1), ClassBound(frozenset("ab"), 0, 0))
    assert isinstance(compile_explicit(constraints, ABC), Infeasible)


def test_explicit_ground_too_large():
    with pytest.raises(QuotaError, match="explicit quotas need"):
        compile_explicit((), _ground(15))


def test_compile_instance_reports_the_hospital():
    formula = Cnf3B2(3, ((1, 2, 3), (1, 2, -3), (-1, -2, 3), (-1, -2, -3)))
    with pytest.raises(QuotaCompileError) as exc_info:
        compile_instance(reduce_sat(formula))
    assert exc_info.value.hospital == "v1"
    assert "--model oracle" in str(exc_info.value)


def test_compile_instance_logs_outcomes(deadlock, caplog):
    with caplog.at_level(logging.DEBUG, logger="efmatch.quotas.compilers"):
        compiled = compile_instance(deadlock)
    assert set(compiled) == {"h1", "h2"}
    assert "compiled interval quota of h1" in caplog.text


def _compiled_examples():
    for seed in range(30):
        rng = make_rng(seed)
        for make in (random_laminar, random_staffing):
            instance = make(rng, doctors=5, hospitals=1, density=1.0)
            ground = instance.acceptable_doctors("h1")
            compiled = compile_quota(instance.quotas["h1"], ground)
            yield OrderedGround(instance.hospital_prefs["h1"]), compiled


def test_independent_sets_of_full_size_are_acceptable():
    for _, compiled in _compiled_examples():
        ground = compiled.ground
        for x in _subsets(ground):
            if len(x) == compiled.p_total:
                independent = compiled.rank(x) == len(x)
                assert independent == compiled.member(x)


def test_choice_reaches_p_total_when_an_acceptable_subset_exists():
    for order, compiled in _compiled_examples():
        family = enumerate_family(compiled.ground, compiled.member)
        for y in _subsets(compiled.ground):
            if any(x <= y for x in family):
                assert len(choose(order, compiled.rank, y)) == compiled.p_total


def test_laminar_spec_type_is_dispatched():
    compiled = compile_quota(LaminarQuota(()), ABC)
    assert compiled.kind == "laminar"
    compiled = compile_quota(StaffingQuota((Section("s", ABC, 0, 3),)), ABC)
    assert compiled.kind == "staffing"
