from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Any

from junitparser import Failure, JUnitXml, Skipped, TestCase, TestSuite

if TYPE_CHECKING:
    from efmatch.runner import InstanceResult

_SUITE_PROPERTIES = ("doctors", "hospitals", "edges", "feasible", "envy_free", "stable")


def write_junit(run_dir: Path, results: list[InstanceResult]) -> Path:
    """Write junit.xml with one suite per instance and one case per check, return path."""
    xml = JUnitXml()

    for result in results:
        suite = TestSuite(result.label)
        for key in _SUITE_PROPERTIES:
            value = result.properties.get(key)
            if value is not None:
                suite.add_property(key, str(value))

        for check in result.checks:
            case = TestCase(check.name)
            case.classname = result.label
            if check.skipped:
                case.result = Skipped(check.message)
            elif not check.passed:
                case.result = Failure(check.message)
            suite.add_testcase(case)

        # add_testcase resets time via update_statistics
        suite.time = round(result.seconds, 4)
        xml.append(suite)

    junit_path = run_dir / "junit.xml"
    xml.write(str(junit_path), pretty=True)
    return junit_path


def _load_suites(junit_path: Path) -> list[dict[str, Any]]:
    suites = []
    for suite in JUnitXml.fromfile(str(junit_path)):
        cases = []
        for case in suite:
            result = None
            if case.result:
                result = {
                    "status": type(case.result[0]).__name__,
                    "message": case.result[0].message or "",
                }
            cases.append({"name": case.name, "result": result})
        suites.append(
            {
                "name": suite.name,
                "tests": suite.tests,
                "failures": suite.failures,
                "skipped": suite.skipped,
                "time": suite.time,
                "properties": {p.name: p.value for p in suite.properties()},
                "cases": cases,
            }
        )
    return suites


def generate_report(run_dir: Path) -> Path:
    """Render junit.xml and meta.yaml into report.html, return path."""
    import yaml
    from jinja2 import Environment, FileSystemLoader

    junit_path = run_dir / "junit.xml"
    if not junit_path.exists():
        raise FileNotFoundError(f"no junit.xml in {run_dir}")

    meta: dict = {}
    meta_path = run_dir / "meta.yaml"
    if meta_path.exists():
        try:
            meta = yaml.safe_load(meta_path.read_text()) or {}
        except yaml.YAMLError:
            pass

    debug_log = ""
    debug_path = run_dir / "debug.log"
    if debug_path.exists():
        debug_log = debug_path.read_text(encoding="utf-8", errors="replace")

    suites = _load_suites(junit_path)
    # Failing instances first, then by label.
    suites.sort(key=lambda s: (-int(s["failures"]), s["name"]))

    tmpl_dir = Path(__file__).parent / "templates"
    env = Environment(loader=FileSystemLoader(str(tmpl_dir)), autoescape=True)
    template = env.get_template("report.html.j2")

    html = template.render(
        suites=suites,
        total_instances=len(suites),
        total_checks=sum(s["tests"] for s in suites),
        total_failures=sum(s["failures"] for s in suites),
        total_skipped=sum(s["skipped"] for s in suites),
        debug_log=debug_log,
        run_dir=str(run_dir),
        meta=meta,
    )
    report_path = run_dir / "report.html"
    report_path.write_text(html, encoding="utf-8")
    return report_path
