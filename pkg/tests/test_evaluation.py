"""Tests for the oracle summary."""
from src.evaluation import BoundRow, OracleResult, evaluate_oracle_results, print_evaluation_report


def rows(*verdicts):
    return [OracleResult(f"oracle_{i}", "nu", v, 0.5 * (i + 1)) for i, v in enumerate(verdicts)]


def test_all_passed():
    metrics = evaluate_oracle_results(rows(True, True), [BoundRow("iterations", 2, "32", True)])
    assert metrics["all_passed"]
    assert metrics["passed"] == 2
    assert metrics["failing"] == []
    assert metrics["bounds_certified"] == 1
    assert metrics["timing"]["total_time"] == 1.5
    assert metrics["timing"]["max_time"] == 1.0


def test_failing_oracle_listed():
    metrics = evaluate_oracle_results(rows(True, False))
    assert not metrics["all_passed"]
    assert metrics["failed"] == 1
    assert metrics["failing"] == ["oracle_1"]


def test_uncertified_bound_fails_run():
    metrics = evaluate_oracle_results(rows(True), [BoundRow("iterations", 40, "32", False)])
    assert not metrics["all_passed"]


def test_empty_run():
    metrics = evaluate_oracle_results([])
    assert metrics["all_passed"]
    assert metrics["timing"]["average_time"] == 0.0


def test_single_row_has_no_spread():
    metrics = evaluate_oracle_results(rows(True))
    assert metrics["timing"]["std_time"] == 0.0
    print_evaluation_report(metrics)
