from __future__ import annotations

import glob
import json
import os
import sys
from enum import Enum
from pathlib import Path
from typing import Annotated, Literal

import yaml
from expandvars import expandvars
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from efmatch.core import MarketInstance, Matching, validate
from efmatch.errors import ConfigError, InvalidInstanceError
from efmatch.quotas.base import (
    ClassBound,
    ExplicitQuota,
    IntervalQuota,
    LaminarQuota,
    QuotaSpec,
    Section,
    StaffingQuota,
)

DEFAULT_BUDGET = 10**7
BUDGET_ENV = "EFM_BUDGET"


class ModelType(str, Enum):
    HRLQ = "hrlq"
    CSM = "csm"
    HR = "hr"
    ORACLE = "oracle"


class GeneratorKind(str, Enum):
    SAT = "sat"
    RANDOM_HRLQ = "random-hrlq"
    COMPLETE_HRLQ = "complete-hrlq"
    RANDOM_LAMINAR = "random-laminar"
    RANDOM_STAFFING = "random-staffing"
    DEADLOCK = "deadlock"


class EmitFormat(str, Enum):
    JSON = "json"
    TEXT = "text"


class IntervalQuotaDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    type: Literal["interval"]
    lower: int
    upper: int


class ConstraintDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    members: list[str]
    lower: int
    upper: int


class ExplicitQuotaDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    type: Literal["explicit"]
    constraints: list[ConstraintDoc] = []


class LaminarQuotaDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    type: Literal["laminar"]
    classes: list[ConstraintDoc] = []


class SectionDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    name: str
    accepts: list[str]
    lower: int
    upper: int


class StaffingQuotaDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")
    type: Literal["staffing"]
    sections: list[SectionDoc] = []
    total_upper: int | None = None


QuotaDoc = Annotated[
    IntervalQuotaDoc | ExplicitQuotaDoc | LaminarQuotaDoc | StaffingQuotaDoc,
    Field(discriminator="type"),
]


def _bounds(docs: list[ConstraintDoc]) -> tuple[ClassBound, ...]:
    return tuple(ClassBound(frozenset(c.members), c.lower, c.upper) for c in docs)


def _bound_docs(bounds: tuple[ClassBound, ...]) -> list[ConstraintDoc]:
    return [ConstraintDoc(members=sorted(b.members), lower=b.lower, upper=b.upper) for b in bounds]


def quota_from_doc(doc: QuotaDoc) -> QuotaSpec:
    match doc:
        case IntervalQuotaDoc():
            return IntervalQuota(doc.lower, doc.upper)
        case ExplicitQuotaDoc():
            return ExplicitQuota(_bounds(doc.constraints))
        case LaminarQuotaDoc():
            return LaminarQuota(_bounds(doc.classes))
        case StaffingQuotaDoc():
            sections = tuple(
                Section(s.name, frozenset(s.accepts), s.lower, s.upper) for s in doc.sections
            )
            return StaffingQuota(sections, doc.total_upper)
    raise TypeError(f"unknown quota document: {type(doc).__name__}")


def quota_to_doc(spec: QuotaSpec) -> QuotaDoc:
    match spec:
        case IntervalQuota(lower=lower, upper=upper):
            return IntervalQuotaDoc(type="interval", lower=lower, upper=upper)
        case ExplicitQuota(constraints=bounds):
            return ExplicitQuotaDoc(type="explicit", constraints=_bound_docs(bounds))
        case LaminarQuota(classes=bounds):
            return LaminarQuotaDoc(type="laminar", classes=_bound_docs(bounds))
        case StaffingQuota(sections=sections, total_upper=total_upper):
            return StaffingQuotaDoc(
                type="staffing",
                sections=[
                    SectionDoc(name=s.name, accepts=sorted(s.accepts), lower=s.lower, upper=s.upper)
                    for s in sections
                ],
                total_upper=total_upper,
            )
    raise TypeError(f"unknown quota type: {type(spec).__name__}")


class InstanceDocument(BaseModel):
    """JSON form of a market instance."""

    model_config = ConfigDict(extra="forbid")
    doctors: list[str]
    hospitals: list[str]
    edges: list[tuple[str, str]]
    doctor_prefs: dict[str, list[str]]
    hospital_prefs: dict[str, list[str]]
    quotas: dict[str, QuotaDoc]

    def to_instance(self) -> MarketInstance:
        return MarketInstance(
            doctors=tuple(self.doctors),
            hospitals=tuple(self.hospitals),
            edges=frozenset(self.edges),
            doctor_prefs={d: tuple(hs) for d, hs in self.doctor_prefs.items()},
            hospital_prefs={h: tuple(ds) for h, ds in self.hospital_prefs.items()},
            quotas={h: quota_from_doc(q) for h, q in self.quotas.items()},
        )

    @classmethod
    def from_instance(cls, instance: MarketInstance) -> InstanceDocument:
        return cls(
            doctors=list(instance.doctors),
            hospitals=list(instance.hospitals),
            edges=sorted(instance.edges),
            doctor_prefs={d: list(instance.doctor_prefs.get(d, ())) for d in instance.doctors},
            hospital_prefs={
                h: list(instance.hospital_prefs.get(h, ())) for h in instance.hospitals
            },
            quotas={h: quota_to_doc(instance.quotas[h]) for h in instance.hospitals},
        )

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", exclude_none=True), indent=2) + "\n"


def _read_text(path: str | Path) -> str:
    if str(path) == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc


def parse_instance(text: str, source: str = "<input>") -> MarketInstance:
    """Parse and validate an instance document."""
    try:
        document = InstanceDocument.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigError(f"{source} is not a valid instance document:\n{exc}") from exc
    instance = document.to_instance()
    violations = validate(instance)
    if violations:
        raise InvalidInstanceError(violations)
    return instance


def load_instance(path: str | Path) -> MarketInstance:
    """Load an instance from ``path``; "-" reads standard input."""
    return parse_instance(_read_text(path), str(path))


def parse_matching(text: str, source: str = "<input>") -> Matching:
    """Parse a JSON list of [doctor, hospital] pairs or ``doctor<TAB>hospital`` lines."""
    if text.lstrip().startswith("["):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        if not isinstance(raw, list) or not all(
            isinstance(p, list) and len(p) == 2 and all(isinstance(x, str) for x in p)
            for p in raw
        ):
            raise ConfigError(f"{source}: expected a list of [doctor, hospital] pairs")
        return Matching.from_pairs(raw)
    pairs = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) != 2:
            raise ConfigError(f"{source}:{number}: expected 'doctor<TAB>hospital'")
        pairs.append((parts[0].strip(), parts[1].strip()))
    return Matching.from_pairs(pairs)


def load_matching(path: str | Path) -> Matching:
    return parse_matching(_read_text(path), str(path))


def format_matching(matching: Matching, emit: EmitFormat = EmitFormat.TEXT) -> str:
    ordered = sorted(matching.pairs)
    if emit == EmitFormat.JSON:
        return json.dumps([list(p) for p in ordered]) + "\n"
    return "".join(f"{d}\t{h}\n" for d, h in ordered)


def budget_from_env() -> int:
    """Enumeration budget from ``EFM_BUDGET``, defaulting to 10^7."""
    raw = os.environ.get(BUDGET_ENV)
    if raw is None or not raw.strip():
        return DEFAULT_BUDGET
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value <= 0:
        raise ConfigError(f"{BUDGET_ENV} must be a positive integer, got {raw!r}")
    return value


class GeneratedGroup(BaseModel):
    """A batch of generated instances; ``seed`` is used for the first, then incremented."""

    model_config = ConfigDict(extra="forbid")
    kind: GeneratorKind
    count: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)
    doctors: int = Field(default=4, ge=0)
    hospitals: int = Field(default=2, ge=0)
    density: float = Field(default=0.6, ge=0.0, le=1.0)
    n: int = Field(default=3, ge=0)


class BatchConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    instances: list[str] = []
    generate: list[GeneratedGroup] = []
    models: list[ModelType] = [ModelType.HRLQ, ModelType.CSM]
    parallel: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def sources_must_not_be_empty(self) -> BatchConfig:
        if not self.instances and not self.generate:
            raise ValueError("batch needs at least one of 'instances' or 'generate'")
        if not self.models:
            raise ValueError("models must not be empty")
        return self


def load_batch(path: Path) -> BatchConfig:
    """Load a YAML batch file, expanding ${VAR} and globs in instance paths.

    Relative paths are resolved against the batch file's directory.
    """
    base = path.parent.resolve()
    try:
        with open(path) as f:
            raw = yaml.safe_load(f) or {}
        config = BatchConfig(**raw)
    except (OSError, yaml.YAMLError, ValidationError, TypeError) as exc:
        raise ConfigError(f"cannot load batch {path}: {exc}") from exc

    resolved: list[str] = []
    for pattern in config.instances:
        try:
            expanded = expandvars(pattern, nounset=True)
        except Exception as exc:
            raise ConfigError(f"instance path {pattern!r}: {exc}") from exc
        full = Path(expanded) if Path(expanded).is_absolute() else base / expanded
        matches = sorted(glob.glob(str(full)))
        if not matches:
            raise ConfigError(f"instance path {pattern!r} matches no files")
        resolved.extend(matches)
    config.instances = resolved
    return config
