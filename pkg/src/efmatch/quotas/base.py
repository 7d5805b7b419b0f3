"""Quota specifications and their direct membership tests.

Each hospital carries one of four quota shapes over its acceptable doctors:
a scalar interval, an explicit list of class constraints, a laminar
classification, or section staffing bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

from efmatch.quotas.flow import staffing_admits


@dataclass(frozen=True)
class ClassBound:
    """Lower and upper bound on how many doctors of ``members`` are chosen."""

    members: frozenset[str]
    lower: int
    upper: int


@dataclass(frozen=True)
class IntervalQuota:
    lower: int
    upper: int

    kind: ClassVar[str] = "interval"


@dataclass(frozen=True)
class ExplicitQuota:
    constraints: tuple[ClassBound, ...] = ()

    kind: ClassVar[str] = "explicit"


@dataclass(frozen=True)
class LaminarQuota:
    classes: tuple[ClassBound, ...] = ()

    kind: ClassVar[str] = "laminar"


@dataclass(frozen=True)
class Section:
    name: str
    accepts: frozenset[str]
    lower: int
    upper: int


@dataclass(frozen=True)
class StaffingQuota:
    sections: tuple[Section, ...] = ()
    total_upper: int | None = None

    kind: ClassVar[str] = "staffing"


QuotaSpec = IntervalQuota | ExplicitQuota | LaminarQuota | StaffingQuota


def _bound_violations(
    label: str, bound: ClassBound, ground: frozenset[str]
) -> list[str]:
    problems: list[str] = []
    outside = bound.members - ground
    if outside:
        problems.append(f"{label} names doctors outside A(h): {sorted(outside)}")
    if bound.lower < 0:
        problems.append(f"{label} has negative lower bound {bound.lower}")
    if bound.lower > bound.upper:
        problems.append(f"{label} has lo > hi ({bound.lower} > {bound.upper})")
    if bound.upper > len(bound.members):
        problems.append(
            f"{label} has hi > |B| ({bound.upper} > {len(bound.members)})"
        )
    return problems


def laminar_witness(
    classes: tuple[ClassBound, ...],
) -> tuple[frozenset[str], frozenset[str]] | None:
    """Return two classes that cross, or None if the family is laminar."""
    for i, first in enumerate(classes):
        for second in classes[i + 1 :]:
            a, b = first.members, second.members
            if a & b and not (a <= b or b <= a):
                return a, b
    return None


def quota_violations(spec: QuotaSpec, ground: frozenset[str]) -> list[str]:
    """Structural problems of ``spec`` over the ground set A(h)."""
    problems: list[str] = []
    size = len(ground)
    match spec:
        case IntervalQuota(lower=lower, upper=upper):
            if lower < 0:
                problems.append(f"l < 0 ({lower})")
            if lower > upper:
                problems.append(f"l > u ({lower} > {upper})")
            if lower > size:
                problems.append(f"l > |A(h)| ({lower} > {size})")
            if upper > size:
                problems.append(f"u > |A(h)| ({upper} > {size})")
        case ExplicitQuota(constraints=constraints):
            for i, bound in enumerate(constraints):
                problems.extend(_bound_violations(f"constraint {i}", bound, ground))
        case LaminarQuota(classes=classes):
            for i, bound in enumerate(classes):
                problems.extend(_bound_violations(f"class {i}", bound, ground))
            witness = laminar_witness(classes)
            if witness is not None:
                problems.append(
                    f"classes {sorted(witness[0])} and {sorted(witness[1])} are not laminar"
                )
        case StaffingQuota(sections=sections, total_upper=total_upper):
            names = [s.name for s in sections]
            if len(set(names)) != len(names):
                problems.append("section names are not unique")
            for section in sections:
                outside = section.accepts - ground
                if outside:
                    problems.append(
                        f"section '{section.name}' accepts doctors outside A(h): {sorted(outside)}"
                    )
                if section.lower < 0 or section.lower > section.upper:
                    problems.append(
                        f"section '{section.name}' needs 0 <= l <= u, got [{section.lower}, {section.upper}]"
                    )
            if total_upper is not None and total_upper < 0:
                problems.append(f"total_upper < 0 ({total_upper})")
    return problems


def admits(spec: QuotaSpec, ground: frozenset[str], chosen: frozenset[str]) -> bool:
    """Whether ``chosen`` belongs to the acceptable family of ``spec``."""
    if not chosen <= ground:
        return False
    match spec:
        case IntervalQuota(lower=lower, upper=upper):
            return lower <= len(chosen) <= upper
        case ExplicitQuota(constraints=bounds) | LaminarQuota(classes=bounds):
            return all(b.lower <= len(chosen & b.members) <= b.upper for b in bounds)
        case StaffingQuota(sections=sections, total_upper=total_upper):
            return staffing_admits(sections, chosen, total_upper)
    raise TypeError(f"unknown quota type: {type(spec).__name__}")


def full_set_upper(spec: QuotaSpec, ground: frozenset[str]) -> int:
    """The upper bound the representation places on |X| for X over all of A(h)."""
    match spec:
        case IntervalQuota(upper=upper):
            return upper
        case ExplicitQuota(constraints=bounds) | LaminarQuota(classes=bounds):
            caps = [b.upper for b in bounds if b.members == ground]
            return min(caps, default=len(ground))
        case StaffingQuota(total_upper=total_upper):
            return len(ground) if total_upper is None else min(total_upper, len(ground))
    raise TypeError(f"unknown quota type: {type(spec).__name__}")


def full_set_lower(spec: QuotaSpec, ground: frozenset[str]) -> int:
    match spec:
        case IntervalQuota(lower=lower):
            return lower
        case ExplicitQuota(constraints=bounds) | LaminarQuota(classes=bounds):
            return max((b.lower for b in bounds if b.members == ground), default=0)
    return 0
