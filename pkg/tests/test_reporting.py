from __future__ import annotations

import pytest
import yaml
from junitparser import Failure, JUnitXml, Skipped

from efmatch.reporting.junit import generate_report, write_junit
from efmatch.runner import CheckOutcome, InstanceResult


@pytest.fixture
def sample_results() -> list[InstanceResult]:
    return [
        InstanceResult(
            label="random-hrlq-seed1",
            properties={"doctors": 4, "hospitals": 2, "edges": 5, "feasible": 3, "envy_free": 1},
            checks=[
                CheckOutcome("hrlq agrees with oracle", True, "solver exists, oracle exists"),
                CheckOutcome("hrlq output is envy-free", True),
            ],
            seconds=0.25,
        ),
        InstanceResult(
            label="random-laminar-seed5",
            properties={"doctors": 4, "hospitals": 2, "edges": 6},
            checks=[
                CheckOutcome("hrlq agrees with oracle", True, "not an interval-quota instance", skipped=True),
                CheckOutcome("csm agrees with oracle", False, "solver none, oracle exists"),
            ],
            seconds=1.5,
        ),
    ]


def test_write_junit_structure(tmp_path, sample_results):
    path = write_junit(tmp_path, sample_results)

    assert path == tmp_path / "junit.xml"
    suites = {s.name: s for s in JUnitXml.fromfile(str(path))}
    assert set(suites) == {"random-hrlq-seed1", "random-laminar-seed5"}

    passing = suites["random-hrlq-seed1"]
    assert passing.tests == 2
    assert passing.failures == 0
    assert passing.time == pytest.approx(0.25)
    assert {p.name: p.value for p in passing.properties()}["envy_free"] == "1"

    failing = suites["random-laminar-seed5"]
    results = {case.name: case.result for case in failing}
    assert isinstance(results["hrlq agrees with oracle"][0], Skipped)
    assert isinstance(results["csm agrees with oracle"][0], Failure)
    assert results["csm agrees with oracle"][0].message == "solver none, oracle exists"


def test_write_junit_omits_missing_properties(tmp_path, sample_results):
    path = write_junit(tmp_path, sample_results)
    suite = next(s for s in JUnitXml.fromfile(str(path)) if s.name == "random-laminar-seed5")
    assert "feasible" not in {p.name for p in suite.properties()}


def test_generate_report_lists_failures_first(tmp_path, sample_results):
    write_junit(tmp_path, sample_results)
    (tmp_path / "meta.yaml").write_text(
        yaml.dump({"run_id": "run-42", "models": ["hrlq", "csm"], "interrupted": True})
    )
    (tmp_path / "debug.log").write_text("[t] checking 2 instance(s)\n")

    html = generate_report(tmp_path).read_text()

    assert "run-42" in html
    assert "hrlq, csm" in html
    assert "results are partial" in html
    assert "checking 2 instance(s)" in html
    assert html.index("random-laminar-seed5") < html.index("random-hrlq-seed1")


def test_generate_report_without_meta(tmp_path, sample_results):
    write_junit(tmp_path, sample_results[:1])
    html = (generate_report(tmp_path)).read_text()
    assert "Debug log" not in html
    assert "random-hrlq-seed1" in html


def test_generate_report_escapes_messages(tmp_path):
    write_junit(
        tmp_path,
        [InstanceResult("x", checks=[CheckOutcome("c", False, "<b>bad</b>")])],
    )
    html = generate_report(tmp_path).read_text()
    assert "<b>bad</b>" not in html
    assert "&lt;b&gt;bad&lt;/b&gt;" in html


def test_generate_report_needs_junit(tmp_path):
    with pytest.raises(FileNotFoundError):
        generate_report(tmp_path)
