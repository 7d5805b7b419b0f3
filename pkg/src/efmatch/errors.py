"""Exception hierarchy for efmatch."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from efmatch.core import Violation


class EfmatchError(Exception):
    """Base class for every error raised by efmatch."""


class InvalidInstanceError(EfmatchError, ValueError):
    def __init__(self, violations: list[Violation]) -> None:
        self.violations = violations
        details = "\n".join(f"  {v}" for v in violations)
        super().__init__(f"instance has {len(violations)} violation(s):\n{details}")


class InvalidMatchingError(EfmatchError, ValueError):
    """A matching refers to pairs outside E or assigns a doctor twice."""


class InfeasibleMatchingError(InvalidMatchingError):
    """A predicate that requires a feasible matching received an infeasible one."""


class QuotaError(EfmatchError, ValueError):
    """A quota specification is malformed or an argument is out of range."""


class NotLaminarError(QuotaError):
    def __init__(self, first: frozenset[str], second: frozenset[str]) -> None:
        self.witness = (first, second)
        super().__init__(
            f"classes {sorted(first)} and {sorted(second)} are neither nested nor disjoint"
        )


class QuotaCompileError(EfmatchError, ValueError):
    """A hospital quota cannot be used by the fixed-point solver."""

    def __init__(self, hospital: str, outcome: Any) -> None:
        self.hospital = hospital
        self.outcome = outcome
        super().__init__(
            f"quota of hospital '{hospital}' is not a compilable paramodular quota: "
            f"{outcome}. Use --model oracle for such instances."
        )


class BudgetExceededError(EfmatchError, RuntimeError):
    def __init__(self, bound: int, budget: int) -> None:
        self.bound = bound
        self.budget = budget
        super().__init__(
            f"enumeration bound {bound} exceeds budget {budget} (set EFM_BUDGET to raise it)"
        )


class FormulaError(EfmatchError, ValueError):
    """A formula violates the (3,B2)-SAT shape."""


class ConfigError(EfmatchError, ValueError):
    """A document, batch file or environment setting cannot be used."""
