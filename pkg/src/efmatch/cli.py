from __future__ import annotations

import importlib.metadata
import json
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import typer

from efmatch.config import EmitFormat, GeneratorKind, ModelType

app = typer.Typer(name="efmatch", help="Envy-free matching under lower quotas")
schema_app = typer.Typer(name="schema", help="Generate instance schema tooling")
app.add_typer(schema_app, name="schema")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_ENVY_FREE = 2
EXIT_CHECK_FAILED = 3
EXIT_BUDGET = 4
EXIT_MISMATCH = 5


def _version_callback(value: bool) -> None:
    if value:
        try:
            version = importlib.metadata.version("efmatch")
        except Exception:
            version = "unknown"
        typer.echo(f"efmatch {version}")
        raise typer.Exit()


@app.callback()
def _main(
    version: bool = typer.Option(
        None,
        "--version",
        "-V",
        callback=_version_callback,
        is_eager=True,
        help="Show version and exit.",
    ),
) -> None:
    pass


@contextmanager
def _logging(verbose: bool, log_file: str | None) -> Iterator[None]:
    """Route library debug output for the duration of one command."""
    if not verbose and log_file is None:
        yield
        return
    from efmatch.verbose import release_logger, setup_logger

    logger = setup_logger(Path(log_file) if log_file else None, verbose=verbose)
    try:
        yield
    finally:
        release_logger(logger)


def _fail(message: str, code: int = EXIT_INPUT) -> typer.Exit:
    typer.echo(f"Error: {message}", err=True)
    return typer.Exit(code)


def _load(path: str):  # type: ignore[no-untyped-def]
    from efmatch.config import load_instance
    from efmatch.errors import EfmatchError

    try:
        return load_instance(path)
    except EfmatchError as e:
        raise _fail(str(e))


VERBOSE = typer.Option(False, "--verbose", "-v", help="Enable debug output to terminal")
LOG_FILE = typer.Option(None, "--log-file", help="Append debug output to this file")


@app.command()
def solve(
    path: str = typer.Argument(help="Instance JSON file, or - for stdin"),
    model: ModelType = typer.Option(ModelType.HRLQ, "--model", "-m", help="Solver to run"),
    emit: EmitFormat = typer.Option(EmitFormat.TEXT, "--emit", help="Matching output format"),
    verbose: bool = VERBOSE,
    log_file: str | None = LOG_FILE,
):
    """Find an envy-free matching, or report that none exists."""
    from efmatch.config import format_matching
    from efmatch.core import NO_ENVY_FREE, NoEnvyFreeMatching
    from efmatch.errors import BudgetExceededError, EfmatchError

    with _logging(verbose, log_file):
        instance = _load(path)
        try:
            if model == ModelType.HRLQ:
                from efmatch.solvers.hr import ef_hrlq

                result = ef_hrlq(instance)
            elif model == ModelType.CSM:
                from efmatch.solvers.fixedpoint import solve as csm_solve

                result = csm_solve(instance)
            elif model == ModelType.HR:
                from efmatch.solvers.hr import stable_hr

                result = stable_hr(instance)
            else:
                from efmatch.oracle import exists_envy_free

                found = exists_envy_free(instance)
                result = NoEnvyFreeMatching() if found is None else found
        except BudgetExceededError as e:
            raise _fail(str(e), EXIT_BUDGET)
        except EfmatchError as e:
            raise _fail(str(e))

        if isinstance(result, NoEnvyFreeMatching):
            typer.echo(NO_ENVY_FREE)
            raise typer.Exit(EXIT_NO_ENVY_FREE)
        typer.echo(format_matching(result, emit), nl=False)


@app.command()
def check(
    path: str = typer.Argument(help="Instance JSON file"),
    matching_path: str = typer.Argument(help="Matching file (JSON pairs or doctor<TAB>hospital lines)"),
    verbose: bool = VERBOSE,
    log_file: str | None = LOG_FILE,
):
    """Report feasibility, blocking pairs and justified envy of a matching."""
    from efmatch.config import load_matching
    from efmatch.core import find_blocking_pairs, find_justified_envy, is_feasible
    from efmatch.errors import EfmatchError

    with _logging(verbose, log_file):
        instance = _load(path)
        try:
            matching = load_matching(matching_path)
            feasible = is_feasible(instance, matching)
        except EfmatchError as e:
            raise _fail(f"{matching_path}: {e}")

        typer.echo(f"feasible: {'yes' if feasible else 'no'}")
        if not feasible:
            raise typer.Exit(EXIT_CHECK_FAILED)

        blocking = find_blocking_pairs(instance, matching)
        envy = find_justified_envy(instance, matching)
        typer.echo(f"blocking pairs: {len(blocking)}")
        for pair in blocking:
            typer.echo(f"  {pair.doctor}\t{pair.hospital}")
        typer.echo(f"justified envy: {len(envy)}")
        for witness in envy:
            typer.echo(f"  {witness.envier} envies {witness.envied} at {witness.hospital}")
        if envy:
            raise typer.Exit(EXIT_CHECK_FAILED)


@app.command()
def generate(
    kind: GeneratorKind = typer.Option(..., "--kind", "-k", help="Instance family"),
    seed: int = typer.Option(0, "--seed", min=0, help="PCG64 seed"),
    doctors: int = typer.Option(4, "--doctors", min=0, help="Number of doctors"),
    hospitals: int = typer.Option(2, "--hospitals", min=0, help="Number of hospitals"),
    density: float = typer.Option(0.6, "--density", min=0.0, max=1.0, help="Edge probability"),
    n: int = typer.Option(3, "--n", min=0, help="Variables of the SAT formula (multiple of 3)"),
    cnf: str | None = typer.Option(None, "--cnf", help="Reduce this DIMACS formula instead of a random one"),
    save_cnf: str | None = typer.Option(None, "--save-cnf", help="Also write the reduced formula as DIMACS"),
):
    """Write a generated instance document to standard output."""
    from efmatch.config import InstanceDocument
    from efmatch.errors import EfmatchError
    from efmatch.generate import generate_instance, make_rng
    from efmatch.oracle import Cnf3B2, random_cnf, reduce_sat

    try:
        if kind == GeneratorKind.SAT:
            if cnf is not None:
                formula = Cnf3B2.from_dimacs(Path(cnf).read_text())
            else:
                if n % 3:
                    raise _fail(f"--n must be a multiple of 3, got {n}")
                formula = random_cnf(n, make_rng(seed))
            if save_cnf is not None:
                Path(save_cnf).write_text(formula.to_dimacs())
            instance = reduce_sat(formula)
        else:
            if cnf is not None or save_cnf is not None:
                raise _fail("--cnf and --save-cnf only apply to --kind sat")
            instance = generate_instance(
                kind, seed, doctors=doctors, hospitals=hospitals, density=density
            )
    except OSError as e:
        raise _fail(f"cannot access formula file: {e}")
    except EfmatchError as e:
        raise _fail(str(e))

    typer.echo(InstanceDocument.from_instance(instance).to_json(), nl=False)


def _format_witness(matching) -> str:  # type: ignore[no-untyped-def]
    if matching is None:
        return "-"
    return "{" + ", ".join(f"({d},{h})" for d, h in matching) + "}"


@app.command()
def oracle(
    path: str = typer.Argument(help="Instance JSON file"),
    verbose: bool = VERBOSE,
    log_file: str | None = LOG_FILE,
):
    """Count feasible, envy-free and stable matchings by enumeration."""
    from efmatch.errors import BudgetExceededError, EfmatchError
    from efmatch.oracle import survey

    with _logging(verbose, log_file):
        instance = _load(path)
        try:
            report = survey(instance)
        except BudgetExceededError as e:
            raise _fail(str(e), EXIT_BUDGET)
        except EfmatchError as e:
            raise _fail(str(e))

        typer.echo(f"feasible={report.feasible} envy-free={report.envy_free} stable={report.stable}")
        typer.echo(f"feasible witness: {_format_witness(report.first_feasible)}")
        typer.echo(f"envy-free witness: {_format_witness(report.first_envy_free)}")
        typer.echo(f"stable witness: {_format_witness(report.first_stable)}")


@app.command()
def crosscheck(
    batch: str = typer.Argument(help="Path to batch YAML config"),
    output_dir: str = typer.Option("runs", help="Output directory for run results"),
    verbose: bool = VERBOSE,
    parallel: int | None = typer.Option(
        None, "--parallel", "-p", min=1, max=100, help="Override the batch parallelism"
    ),
):
    """Cross-check solvers against brute-force enumeration over a batch of instances."""
    from efmatch.config import load_batch
    from efmatch.errors import EfmatchError
    from efmatch.reporting.junit import generate_report
    from efmatch.runner import Runner

    batch_path = Path(batch)
    if not batch_path.exists():
        raise _fail(f"batch file not found: {batch}")
    try:
        config = load_batch(batch_path)
    except EfmatchError as e:
        raise _fail(str(e))
    if parallel is not None:
        config.parallel = parallel

    runner = Runner(config=config, output_dir=Path(output_dir), verbose=verbose)
    try:
        run_dir = runner.execute()
    except EfmatchError as e:
        raise _fail(str(e))

    typer.echo("Generating report...")
    report_path = generate_report(run_dir)
    typer.echo(f"Run complete: {run_dir}")
    typer.echo(f"Report: {report_path}")

    if runner.interrupted:
        raise typer.Exit(EXIT_INPUT)
    if runner.mismatches:
        typer.echo(f"{runner.mismatches} mismatch(es) against the oracle", err=True)
        raise typer.Exit(EXIT_MISMATCH)


@app.command()
def report(
    run_dir: str = typer.Argument(help="Path to run output directory"),
):
    """Regenerate the HTML report of a previous cross-check run."""
    from efmatch.reporting.junit import generate_report

    run_path = Path(run_dir)
    if not run_path.exists() or not (run_path / "junit.xml").exists():
        raise _fail(f"not a valid run directory: {run_dir}")

    report_path = generate_report(run_path)
    typer.echo(f"Report generated: {report_path}")


@app.command()
def bench(
    sizes: str = typer.Option("1000,2000,4000", help="Comma-separated edge counts"),
    solver: str = typer.Option("hrlq,csm", help="Comma-separated solvers: hrlq, csm"),
    repeat: int = typer.Option(3, "--repeat", "-r", min=1, max=100, help="Timings per size"),
    seed: int = typer.Option(0, "--seed", min=0),
    as_json: bool = typer.Option(False, "--json", help="Print results as JSON"),
):
    """Time the solvers on growing interval-quota markets and fit the scaling exponent."""
    from efmatch.metrics import run_bench

    try:
        edge_counts = [int(s) for s in sizes.split(",") if s.strip()]
    except ValueError:
        raise _fail(f"--sizes must be comma-separated integers, got {sizes!r}")
    if not edge_counts or min(edge_counts) <= 0:
        raise _fail("--sizes needs at least one positive edge count")
    names = [s.strip() for s in solver.split(",") if s.strip()]
    try:
        series = run_bench(edge_counts, names, repeat=repeat, seed=seed)
    except ValueError as e:
        raise _fail(str(e))

    if as_json:
        typer.echo(json.dumps([s.to_dict() for s in series], indent=2))
        return
    for s in series:
        exponent = f"{s.exponent:.2f}" if s.exponent is not None else "n/a"
        typer.echo(f"{s.solver}: fitted exponent {exponent}")
        for point in s.points:
            typer.echo(
                f"  |E|={point.edges:>8}  min {point.stats.min:.6f}s  avg {point.stats.avg:.6f}s"
            )


@schema_app.command("generate")
def schema_generate(
    dir: str = typer.Option(
        ".", "--dir", help="Project directory for default schema/doc outputs"
    ),
    out: str | None = typer.Option(
        None,
        help="Output path for JSON Schema (defaults to <dir>/schemas/efmatch.schema.json)",
    ),
    doc: str | None = typer.Option(
        None, help="Output path for schema docs (defaults to <dir>/docs/schema.md)"
    ),
):
    """Generate JSON Schema and docs for the instance document format."""
    from efmatch.schema import write_json_schema, write_schema_doc

    project_dir = Path(dir)
    out_path = (
        Path(out) if out is not None else project_dir / "schemas" / "efmatch.schema.json"
    )
    doc_path = Path(doc) if doc is not None else project_dir / "docs" / "schema.md"
    write_json_schema(out_path)
    write_schema_doc(doc_path)
    typer.echo(f"Wrote schema: {out_path}")
    typer.echo(f"Wrote docs: {doc_path}")
