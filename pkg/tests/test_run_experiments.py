"""Tests for the scenario runner, its reports and the command line."""
import copy
import json
from fractions import Fraction

import pytest

from data.data_loader import (
    bundled_scenarios,
    check_schema,
    load_scenario,
    load_schema,
    parse_scenario,
    scenario_to_dict,
)
from experiments.run_experiments import (
    RunContext,
    bound_expression,
    convert_to_native_types,
    emit_report,
    main,
    run_experiment,
    verify_report,
)
from experiments.save_traces import save_traces
from src.bounds import Ordering, render
from src.measure_core import AtomSet, Partition

SCENARIOS = bundled_scenarios()
CSV_HEADER = "series,index,numerator,denominator\n"


@pytest.fixture(scope="module")
def scenario():
    return load_scenario(SCENARIOS["regularity_space4"])


@pytest.fixture(scope="module")
def report(scenario):
    return run_experiment(scenario)


def test_convert_to_native_types():
    value = {
        "delta": Fraction(-3, 8),
        "sigma": AtomSet.of([0, 2]),
        "partition": Partition.of([[0], [1, 3]]),
        "verdict": Ordering.LESS,
        "rows": (1, Fraction(2)),
    }
    assert convert_to_native_types(value) == {
        "delta": "-3/8",
        "sigma": [0, 2],
        "partition": [[0], [1, 3]],
        "verdict": "Less",
        "rows": [1, "2"],
    }


class TestReport:
    def test_regularity_passes(self, report):
        summary = report["summary"]
        assert summary["all_passed"]
        assert summary["oracles"] == summary["passed"] > 0
        assert report["bounds"] and all(b["certified"] for b in report["bounds"])
        assert report["scenario"]["kind"] == "regularity"
        assert "timing" not in report

    def test_matches_schema(self, report):
        check_schema(json.loads(emit_report(report)), "report")

    def test_deterministic(self, scenario, report):
        assert emit_report(run_experiment(scenario)) == emit_report(report)

    def test_timing_on_request(self, scenario):
        timed = run_experiment(scenario, timed=True)
        assert "total_time" in timed["timing"]
        check_schema(json.loads(emit_report(timed)), "report")

    def test_malformed_partition_is_a_failed_row(self, scenario):
        ctx = RunContext(scenario, 100, 0)
        assert not ctx.check("partition", "overlap", lambda: Partition.of([[0, 1], [1]]))
        assert ctx.oracles[0].error and "overlap" in ctx.oracles[0].error

    def test_failed_construction_is_a_failed_row(self, scenario):
        document = scenario_to_dict(scenario)
        document["experiment"]["params"] = {**document["experiment"]["params"], "B": "1/4"}
        failing = run_experiment(parse_scenario(document))
        assert not failing["summary"]["all_passed"]
        row = failing["oracles"][-1]
        assert row["oracle"] == "regularity"
        assert row["error"]


class TestEmit:
    def test_csv(self, report):
        text = emit_report(report, "csv").decode("utf-8")
        assert text.startswith(CSV_HEADER)
        assert len(text.splitlines()) == len(report["series"]) + 1

    def test_csv_columns_match_report_schema(self):
        columns = load_schema("report")["properties"]["series"]["items"]["required"]
        assert CSV_HEADER == ",".join(columns) + "\n"

    def test_csv_without_series(self):
        assert emit_report({"series": []}, "csv").decode("utf-8") == CSV_HEADER

    def test_unknown_format(self, report):
        with pytest.raises(ValueError):
            emit_report(report, "xml")

    def test_save_traces(self, report, tmp_path):
        path = tmp_path / "traces.csv"
        assert save_traces(report, path) == len(report["series"])
        assert path.read_text(encoding="utf-8") == emit_report(report, "csv").decode("utf-8")


class TestVerify:
    def test_round_trip(self, report):
        assert verify_report(json.loads(emit_report(report)))

    def test_tampered_verdict(self, report):
        tampered = json.loads(emit_report(report))
        tampered["oracles"][0]["passed"] = not tampered["oracles"][0]["passed"]
        assert not verify_report(tampered)

    def test_tampered_digest(self, report):
        tampered = copy.deepcopy(json.loads(emit_report(report)))
        tampered["scenario"]["digest"] = "0" * 64
        assert not verify_report(tampered)


class TestCommandLine:
    def test_run_and_verify(self, tmp_path):
        assert main(["run", str(SCENARIOS["regularity_space4"]), "--output", str(tmp_path)]) == 0
        assert main(["verify", str(tmp_path / "report.json")]) == 0

    def test_run_csv(self, tmp_path):
        assert main(["--format", "csv", "run", str(SCENARIOS["regularity_space4"]), "--output", str(tmp_path)]) == 0
        assert (tmp_path / "report.csv").read_text(encoding="utf-8").startswith(CSV_HEADER)

    def test_bad_scenario(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        assert main(["run", str(path), "--output", str(tmp_path)]) == 2

    def test_failing_run_exits_one(self, tmp_path, scenario):
        document = scenario_to_dict(scenario)
        document["experiment"]["params"] = {**document["experiment"]["params"], "B": "1/4"}
        path = tmp_path / "tight.json"
        path.write_text(json.dumps(document), encoding="utf-8")
        assert main(["run", str(path), "--output", str(tmp_path / "out")]) == 1

    def test_bounds(self, capsys):
        assert main(["bounds", "b0", "B=1", "D=1", "E=1"]) == 0
        assert capsys.readouterr().out.split() == ["1536", "1536"]
        assert main(["bounds", "fgh", "j=2", "m=3"]) == 0
        assert capsys.readouterr().out.split() == ["24", "24"]

    def test_unknown_bound(self):
        assert main(["bounds", "zeta", "B=1"]) == 2
        assert main(["bounds", "b0", "B"]) == 2

    def test_bound_expression(self):
        assert render(bound_expression("final", {"B": 1, "E": 1})) == f"f_ω({2**22 + 5})"
        assert render(bound_expression("f", {"a": "x", "B": 1, "D": 1, "E": 1})).startswith("𝔣(")


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_bundled_scenarios_pass(name):
    report = run_experiment(load_scenario(SCENARIOS[name]))
    assert report["summary"]["all_passed"], report["summary"]["failing"]
