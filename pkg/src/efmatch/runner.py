from __future__ import annotations

import logging
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import yaml

from efmatch.config import BatchConfig, ModelType, load_instance
from efmatch.core import (
    MarketInstance,
    Matching,
    NoEnvyFreeMatching,
    find_blocking_pairs,
    find_justified_envy,
    is_feasible,
)
from efmatch.errors import BudgetExceededError, EfmatchError
from efmatch.generate import generate_instance
from efmatch.oracle import OracleReport, survey
from efmatch.verbose import release_logger, setup_logger

InstanceLabel = str


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    message: str = ""
    skipped: bool = False

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class InstanceResult:
    label: InstanceLabel
    properties: dict[str, Any] = field(default_factory=dict)
    checks: list[CheckOutcome] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def mismatches(self) -> int:
        return sum(1 for c in self.checks if not c.passed and not c.skipped)


def _verdict(found: Matching | None) -> str:
    return "exists" if found is not None else "none"


def check_hrlq(instance: MarketInstance, report: OracleReport) -> list[CheckOutcome]:
    from efmatch.solvers.hr import ef_hrlq

    name = "hrlq agrees with oracle"
    if not instance.is_interval:
        return [CheckOutcome(name, True, "not an interval-quota instance", skipped=True)]
    result = ef_hrlq(instance)
    found = None if isinstance(result, NoEnvyFreeMatching) else result
    checks = [
        CheckOutcome(
            name,
            _verdict(found) == _verdict(report.first_envy_free),
            f"solver {_verdict(found)}, oracle {_verdict(report.first_envy_free)}",
        )
    ]
    if found is not None:
        envy = find_justified_envy(instance, found) if is_feasible(instance, found) else None
        checks.append(
            CheckOutcome(
                "hrlq output is envy-free",
                envy == [],
                "" if envy == [] else f"infeasible or envy {envy}",
            )
        )
    return checks


def check_csm(instance: MarketInstance, report: OracleReport) -> list[CheckOutcome]:
    from efmatch.solvers.fixedpoint import FixedPointSolver

    name = "csm agrees with oracle"
    try:
        solver = FixedPointSolver(instance)
    except EfmatchError as exc:
        return [CheckOutcome(name, True, str(exc), skipped=True)]
    run = solver.run()
    bound = 2 * len(solver.index)
    result = solver.solve()
    found = None if isinstance(result, NoEnvyFreeMatching) else result
    checks = [
        CheckOutcome(
            name,
            _verdict(found) == _verdict(report.first_envy_free),
            f"solver {_verdict(found)}, oracle {_verdict(report.first_envy_free)}",
        ),
        CheckOutcome(
            "fixed point within 2|E| steps",
            run.iterations <= bound,
            f"{run.iterations} iterations, bound {bound}",
        ),
    ]
    if found is not None:
        envy = find_justified_envy(instance, found) if is_feasible(instance, found) else None
        checks.append(
            CheckOutcome(
                "csm output is envy-free",
                envy == [],
                "" if envy == [] else f"infeasible or envy {envy}",
            )
        )
    if report.first_envy_free is not None:
        start = solver.prefixpoint_from(report.first_envy_free)
        other = solver.matching_of(solver.run(start).state)
        expected = solver.matching_of(run.state).counts(instance.hospitals)
        checks.append(
            CheckOutcome(
                "hospital counts agree across fixed points",
                other.counts(instance.hospitals) == expected,
                f"{other.counts(instance.hospitals)} vs {expected}",
            )
        )
    return checks


def check_hr(instance: MarketInstance, report: OracleReport) -> list[CheckOutcome]:
    from efmatch.solvers.hr import hr_relaxation, stable_hr

    name = "hr output is stable"
    if not instance.is_interval:
        return [CheckOutcome(name, True, "not an interval-quota instance", skipped=True)]
    blocking = find_blocking_pairs(hr_relaxation(instance), stable_hr(instance))
    return [CheckOutcome(name, not blocking, f"blocking pairs {blocking}" if blocking else "")]


CHECKS: dict[ModelType, Callable[[MarketInstance, OracleReport], list[CheckOutcome]]] = {
    ModelType.HRLQ: check_hrlq,
    ModelType.CSM: check_csm,
    ModelType.HR: check_hr,
}


class Runner:
    """Cross-checks the solvers against brute-force enumeration over a batch."""

    def __init__(
        self,
        config: BatchConfig,
        output_dir: Path,
        verbose: bool = False,
        budget: int | None = None,
    ):
        self.config = config
        self.output_dir = output_dir
        self.verbose = verbose
        self.budget = budget
        self.interrupted = False
        self.results: list[InstanceResult] = []

    @property
    def mismatches(self) -> int:
        return sum(r.mismatches for r in self.results)

    def _sources(self) -> list[tuple[InstanceLabel, Callable[[], MarketInstance]]]:
        sources: list[tuple[InstanceLabel, Callable[[], MarketInstance]]] = []
        for path in self.config.instances:
            sources.append((Path(path).name, lambda p=path: load_instance(p)))
        for group in self.config.generate:
            params = group.model_dump(exclude={"kind", "count", "seed"})
            for offset in range(group.count):
                seed = group.seed + offset
                sources.append(
                    (
                        f"{group.kind.value}-seed{seed}",
                        lambda k=group.kind, s=seed, p=params: generate_instance(k, s, **p),
                    )
                )
        return sources

    def execute(self) -> Path:
        """Check every instance against every configured model. Returns the run directory."""
        run_id = datetime.now(timezone.utc).strftime("%Y-%m-%d_%H%M%S")
        run_dir = self.output_dir / run_id
        run_dir.mkdir(parents=True, exist_ok=True)

        logger = setup_logger(run_dir / "debug.log", verbose=self.verbose, logger_name="efmatch")
        try:
            self._execute(run_dir, logger)
        finally:
            release_logger(logger)
        return run_dir

    def _execute(self, run_dir: Path, logger: logging.Logger) -> None:
        sources = self._sources()
        logger.debug("checking %d instance(s) with models %s", len(sources), self.config.models)
        print(
            f"Checking {len(sources)} instance(s) with parallelism {self.config.parallel}...",
            flush=True,
        )
        slots: list[InstanceResult | None] = [None] * len(sources)

        with ThreadPoolExecutor(max_workers=self.config.parallel) as executor:
            future_to_index = {
                executor.submit(self._check_instance, label, load, logger): i
                for i, (label, load) in enumerate(sources)
            }
            completed = 0
            try:
                for future in as_completed(future_to_index):
                    index = future_to_index[future]
                    result = future.result()
                    slots[index] = result
                    completed += 1
                    status = "ok" if result.mismatches == 0 else f"{result.mismatches} MISMATCH(ES)"
                    print(
                        f"  [{completed}/{len(sources)}] {result.label} ({status}, {result.seconds:.2f}s)",
                        flush=True,
                    )
            except KeyboardInterrupt:
                self.interrupted = True
                cancelled = sum(1 for f in future_to_index if f.cancel())
                logger.warning("run interrupted, cancelled %d pending instance(s)", cancelled)

        self.results = [r for r in slots if r is not None]
        self._write_results(run_dir)

    def _check_instance(
        self, label: InstanceLabel, load: Callable[[], MarketInstance], logger: logging.Logger
    ) -> InstanceResult:
        started = time.perf_counter()
        result = InstanceResult(label)
        try:
            instance = load()
        except EfmatchError as exc:
            logger.error("instance %s could not be loaded: %s", label, exc)
            result.checks.append(CheckOutcome("instance loads", False, str(exc)))
            return result
        result.properties.update(
            doctors=len(instance.doctors),
            hospitals=len(instance.hospitals),
            edges=len(instance.edges),
        )
        try:
            report = survey(instance, self.budget)
        except BudgetExceededError as exc:
            result.checks.append(CheckOutcome("oracle within budget", True, str(exc), skipped=True))
            result.seconds = time.perf_counter() - started
            return result
        result.properties.update(
            feasible=report.feasible, envy_free=report.envy_free, stable=report.stable
        )
        for model in self.config.models:
            check = CHECKS.get(model)
            if check is None:
                continue
            try:
                result.checks.extend(check(instance, report))
            except Exception as exc:
                logger.exception("%s check crashed on %s", model.value, label)
                result.checks.append(
                    CheckOutcome(f"{model.value} check runs", False, f"{type(exc).__name__}: {exc}")
                )
        result.seconds = time.perf_counter() - started
        logger.debug(
            "%s: %d check(s), %d mismatch(es)", label, len(result.checks), result.mismatches
        )
        return result

    def _write_results(self, run_dir: Path) -> None:
        """Write junit.xml and meta.yaml to the run directory."""
        from efmatch.reporting.junit import write_junit

        write_junit(run_dir, self.results)

        try:
            import importlib.metadata

            version = importlib.metadata.version("efmatch")
        except Exception:
            version = "unknown"

        meta: dict[str, Any] = {
            "run_id": run_dir.name,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "instances": [r.label for r in self.results],
            "models": [m.value for m in self.config.models],
            "mismatches": self.mismatches,
            "efmatch_version": version,
        }
        if self.interrupted:
            meta["interrupted"] = True

        (run_dir / "meta.yaml").write_text(yaml.dump(meta, default_flow_style=False))
