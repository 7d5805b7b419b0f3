"""Brute-force ground truth and the (3,B2)-SAT reduction.

Enumeration walks the doctors in instance order, trying each doctor's
hospitals in preference order and "unassigned" last, and drops a branch as
soon as a hospital whose last acceptable doctor has been decided holds an
unacceptable set. The first witness of every kind is therefore reproducible.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass
from typing import Literal

import numpy as np

from efmatch.config import budget_from_env
from efmatch.core import (
    MarketInstance,
    Matching,
    find_blocking_pairs,
    find_justified_envy,
)
from efmatch.errors import BudgetExceededError, FormulaError
from efmatch.quotas.base import ClassBound, ExplicitQuota

logger = logging.getLogger(__name__)

MAX_SAT_VARIABLES = 20


def enumeration_bound(instance: MarketInstance) -> int:
    """Number of assignments before pruning: the product of |A(d)| + 1."""
    return math.prod(len(instance.doctor_prefs.get(d, ())) + 1 for d in instance.doctors)


def enumerate_matchings(instance: MarketInstance, budget: int | None = None) -> Iterator[Matching]:
    """Yield every feasible matching in a fixed order.

    Raises ``BudgetExceededError`` before enumerating when the assignment
    count exceeds ``budget`` (``EFM_BUDGET`` by default).
    """
    budget = budget_from_env() if budget is None else budget
    bound = enumeration_bound(instance)
    if bound > budget:
        logger.warning("refusing to enumerate %d assignments (budget %d)", bound, budget)
        raise BudgetExceededError(bound, budget)

    doctors = instance.doctors
    position = {d: i for i, d in enumerate(doctors)}
    closing: list[list[str]] = [[] for _ in doctors]
    for hospital in instance.hospitals:
        members = instance.acceptable_doctors(hospital)
        if members:
            closing[max(position[d] for d in members)].append(hospital)
        elif not instance.admits(hospital, frozenset()):
            return

    held: dict[str, set[str]] = {h: set() for h in instance.hospitals}
    chosen: list[tuple[str, str]] = []

    def extend(i: int) -> Iterator[Matching]:
        if i == len(doctors):
            yield Matching(frozenset(chosen))
            return
        doctor = doctors[i]
        for hospital in (*instance.doctor_prefs.get(doctor, ()), None):
            if hospital is not None:
                held[hospital].add(doctor)
                chosen.append((doctor, hospital))
            if all(instance.admits(h, frozenset(held[h])) for h in closing[i]):
                yield from extend(i + 1)
            if hospital is not None:
                held[hospital].discard(doctor)
                chosen.pop()

    yield from extend(0)


def exists_envy_free(instance: MarketInstance, budget: int | None = None) -> Matching | None:
    for matching in enumerate_matchings(instance, budget):
        if not find_justified_envy(instance, matching):
            return matching
    return None


def exists_stable(instance: MarketInstance, budget: int | None = None) -> Matching | None:
    for matching in enumerate_matchings(instance, budget):
        if not find_blocking_pairs(instance, matching):
            return matching
    return None


@dataclass(frozen=True)
class OracleReport:
    """Counts of feasible, envy-free and stable matchings with first witnesses."""

    bound: int
    feasible: int = 0
    envy_free: int = 0
    stable: int = 0
    first_feasible: Matching | None = None
    first_envy_free: Matching | None = None
    first_stable: Matching | None = None


def survey(instance: MarketInstance, budget: int | None = None) -> OracleReport:
    counts = {"feasible": 0, "envy_free": 0, "stable": 0}
    firsts: dict[str, Matching | None] = dict.fromkeys(counts)
    for matching in enumerate_matchings(instance, budget):
        kinds = ["feasible"]
        if not find_justified_envy(instance, matching):
            kinds.append("envy_free")
        if not find_blocking_pairs(instance, matching):
            kinds.append("stable")
        for kind in kinds:
            counts[kind] += 1
            if firsts[kind] is None:
                firsts[kind] = matching
    return OracleReport(
        bound=enumeration_bound(instance),
        feasible=counts["feasible"],
        envy_free=counts["envy_free"],
        stable=counts["stable"],
        first_feasible=firsts["feasible"],
        first_envy_free=firsts["envy_free"],
        first_stable=firsts["stable"],
    )


Clause = tuple[int, int, int]
# Occurrence labels of a variable: two positive, two negative.
OCCURRENCES = (1, 2, -1, -2)


@dataclass(frozen=True)
class Cnf3B2:
    """A CNF where each clause has three literals and each variable occurs
    exactly twice positively and twice negatively.

    Literals are DIMACS-style signed integers over variables 1..n.
    """

    n_vars: int
    clauses: tuple[Clause, ...]

    def violations(self) -> list[str]:
        problems: list[str] = []
        if self.n_vars < 0:
            problems.append(f"negative variable count {self.n_vars}")
        counts = {lit: 0 for v in range(1, self.n_vars + 1) for lit in (v, -v)}
        for j, clause in enumerate(self.clauses, start=1):
            if len(clause) != 3:
                problems.append(f"clause {j} has {len(clause)} literals, expected 3")
            for lit in clause:
                if lit not in counts:
                    problems.append(f"clause {j} uses unknown literal {lit}")
                else:
                    counts[lit] += 1
        for lit, count in counts.items():
            if count != 2:
                problems.append(f"literal {lit} occurs {count} times, expected 2")
        return problems

    def check(self) -> None:
        problems = self.violations()
        if problems:
            raise FormulaError("; ".join(problems))

    def occurrence_clauses(self) -> dict[tuple[int, int], int]:
        """Map (variable, occurrence label) to the 0-based index of its clause."""
        seen: dict[int, int] = {}
        where: dict[tuple[int, int], int] = {}
        for j, clause in enumerate(self.clauses):
            for lit in clause:
                seen[lit] = seen.get(lit, 0) + 1
                label = seen[lit] if lit > 0 else -seen[lit]
                where[(abs(lit), label)] = j
        return where

    def satisfied_by(self, assignment: tuple[bool, ...]) -> bool:
        return all(
            any(assignment[abs(lit) - 1] == (lit > 0) for lit in clause)
            for clause in self.clauses
        )

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.n_vars} {len(self.clauses)}"]
        lines.extend(" ".join(str(lit) for lit in clause) + " 0" for clause in self.clauses)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dimacs(cls, text: str) -> Cnf3B2:
        n_vars: int | None = None
        declared = 0
        literals: list[int] = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith(("c", "%")):
                continue
            if line.startswith("p"):
                parts = line.split()
                if len(parts) != 4 or parts[1] != "cnf":
                    raise FormulaError(f"bad problem line: {line!r}")
                try:
                    n_vars, declared = int(parts[2]), int(parts[3])
                except ValueError as exc:
                    raise FormulaError(f"bad problem line: {line!r}") from exc
                continue
            try:
                literals.extend(int(token) for token in line.split())
            except ValueError as exc:
                raise FormulaError(f"bad clause line: {line!r}") from exc
        if n_vars is None:
            raise FormulaError("missing 'p cnf' problem line")
        clauses: list[tuple[int, ...]] = []
        current: list[int] = []
        for lit in literals:
            if lit == 0:
                clauses.append(tuple(current))
                current = []
            else:
                current.append(lit)
        if current:
            raise FormulaError("last clause is not terminated by 0")
        if len(clauses) != declared:
            raise FormulaError(f"problem line declares {declared} clauses, found {len(clauses)}")
        formula = cls(n_vars, tuple(clauses))  # type: ignore[arg-type]
        formula.check()
        return formula


def random_cnf(n_vars: int, rng: np.random.Generator, max_tries: int = 10_000) -> Cnf3B2:
    """Shuffle the 4n literal slots into clause triples until no clause repeats a variable."""
    if n_vars % 3:
        raise FormulaError(f"variable count must be divisible by 3, got {n_vars}")
    slots = np.array([lit for v in range(1, n_vars + 1) for lit in (v, v, -v, -v)], dtype=np.int64)
    for _ in range(max_tries):
        triples = rng.permutation(slots).reshape(-1, 3)
        if all(len(set(np.abs(row).tolist())) == 3 for row in triples):
            clauses = tuple((int(a), int(b), int(c)) for a, b, c in triples.tolist())
            return Cnf3B2(n_vars, clauses)
    raise FormulaError(f"no valid formula after {max_tries} shuffles")


def solve_sat(formula: Cnf3B2) -> tuple[bool, ...] | None:
    """First satisfying assignment in binary counting order, or None.

    Bit i of the counter is variable i + 1; assignments are tested in chunks.
    """
    formula.check()
    n = formula.n_vars
    if n > MAX_SAT_VARIABLES:
        raise FormulaError(f"exhaustive search needs n <= {MAX_SAT_VARIABLES}, got {n}")
    shifts = np.arange(n, dtype=np.int64)
    chunk = 1 << 16
    for start in range(0, 1 << n, chunk):
        counters = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        values = ((counters[:, None] >> shifts) & 1).astype(bool)
        ok = np.ones(len(counters), dtype=bool)
        for clause in formula.clauses:
            hit = np.zeros(len(counters), dtype=bool)
            for lit in clause:
                column = values[:, abs(lit) - 1]
                hit |= column if lit > 0 else ~column
            ok &= hit
        if ok.any():
            row = values[int(np.argmax(ok))]
            return tuple(bool(v) for v in row)
    return None


def _doctor(variable: int, label: int) -> str:
    return f"d{variable}{'p' if label > 0 else 'n'}{abs(label)}"


def _variable_hospital(variable: int) -> str:
    return f"v{variable}"


def _clause_hospital(index: int) -> str:
    return f"c{index + 1}"


def reduce_sat(
    formula: Cnf3B2, hospital_order: Literal["ascending", "descending"] = "ascending"
) -> MarketInstance:
    """CSM instance with an envy-free matching exactly when ``formula`` is satisfiable.

    Each variable gets a hospital that must take either its two positive or
    its two negative occurrence doctors; each clause gets a hospital that
    needs at least one of its three occurrence doctors. Hospitals rank
    doctors by creation order, or its reverse.
    """
    formula.check()
    where = formula.occurrence_clauses()
    doctors: list[str] = []
    doctor_prefs: dict[str, tuple[str, ...]] = {}
    clause_members: dict[str, list[str]] = {_clause_hospital(j): [] for j in range(len(formula.clauses))}
    quotas: dict[str, ExplicitQuota] = {}
    hospital_prefs: dict[str, tuple[str, ...]] = {}

    for v in range(1, formula.n_vars + 1):
        group = [_doctor(v, t) for t in OCCURRENCES]
        for t, doctor in zip(OCCURRENCES, group):
            clause = _clause_hospital(where[(v, t)])
            doctors.append(doctor)
            doctor_prefs[doctor] = (_variable_hospital(v), clause)
            clause_members[clause].append(doctor)
        positive, negative = group[:2], group[2:]
        quotas[_variable_hospital(v)] = ExplicitQuota(
            tuple(ClassBound(frozenset({a, b}), 1, 1) for a in positive for b in negative)
        )
        hospital_prefs[_variable_hospital(v)] = tuple(group)

    for clause, members in clause_members.items():
        quotas[clause] = ExplicitQuota((ClassBound(frozenset(members), 1, 3),))
        hospital_prefs[clause] = tuple(sorted(members, key=doctors.index))

    if hospital_order == "descending":
        hospital_prefs = {h: tuple(reversed(ds)) for h, ds in hospital_prefs.items()}

    hospitals = (
        *(_variable_hospital(v) for v in range(1, formula.n_vars + 1)),
        *clause_members,
    )
    return MarketInstance(
        doctors=tuple(doctors),
        hospitals=hospitals,
        edges=frozenset((d, h) for d, hs in doctor_prefs.items() for h in hs),
        doctor_prefs=doctor_prefs,
        hospital_prefs=hospital_prefs,
        quotas=quotas,
    )


def sat_witness_matching(formula: Cnf3B2, assignment: tuple[bool, ...]) -> Matching:
    """Matching built from an assignment: a true variable's hospital takes its
    negative doctors, a false one its positive doctors, and every other doctor
    goes to their clause hospital."""
    where = formula.occurrence_clauses()
    pairs: set[tuple[str, str]] = set()
    for v in range(1, formula.n_vars + 1):
        home = OCCURRENCES[2:] if assignment[v - 1] else OCCURRENCES[:2]
        for t in OCCURRENCES:
            target = _variable_hospital(v) if t in home else _clause_hospital(where[(v, t)])
            pairs.add((_doctor(v, t), target))
    return Matching(frozenset(pairs))
