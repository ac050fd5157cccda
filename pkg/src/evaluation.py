"""
Evaluation module for the measure mining project.

Every construction a scenario runs is checked by an oracle; each check becomes one
``OracleResult`` row, and the rows of a run are summarised the same way for every kind.
"""
from dataclasses import dataclass, field
from statistics import mean, stdev
from typing import Any, Dict, List, Optional

from src.config import logger


@dataclass
class OracleResult:
    """One oracle verdict with timing information."""

    oracle: str
    subject: str
    passed: bool
    elapsed: float  # in seconds
    detail: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None


@dataclass
class BoundRow:
    """An observed count set against the theoretical bound it must not exceed."""

    name: str
    observed: int
    theoretical: str
    certified: bool


def evaluate_oracle_results(
    results: List[OracleResult], bound_rows: Optional[List[BoundRow]] = None
) -> Dict:
    """
    Pass counts, failing oracles and timing statistics of one run.

    Args:
        results: oracle rows of the run
        bound_rows: observed-vs-theoretical rows, all of which must certify

    Returns:
        Dict with the summary; ``all_passed`` is what the CLI exit code follows
    """
    bound_rows = bound_rows or []
    times = [r.elapsed for r in results]
    passed = sum(1 for r in results if r.passed)
    certified = sum(1 for b in bound_rows if b.certified)

    timing = {
        "average_time": 0.0,
        "std_time": 0.0,
        "max_time": 0.0,
        "min_time": 0.0,
        "total_time": 0.0,
    }
    if times:
        timing = {
            "average_time": round(mean(times), 3),
            "std_time": round(stdev(times), 3) if len(times) > 1 else 0.0,
            "max_time": round(max(times), 3),
            "min_time": round(min(times), 3),
            "total_time": round(sum(times), 3),
        }

    return {
        "oracles": len(results),
        "passed": passed,
        "failed": len(results) - passed,
        "failing": [r.oracle for r in results if not r.passed],
        "bounds": len(bound_rows),
        "bounds_certified": certified,
        "all_passed": passed == len(results) and certified == len(bound_rows),
        "timing": timing,
    }


def print_evaluation_report(metrics: Dict) -> None:
    logger.info("\n=== Oracle Evaluation Report ===")

    logger.info("\nOracle Verdicts:")
    logger.info(f"Oracles run: {metrics['oracles']}")
    logger.info(f"Passed: {metrics['passed']}")
    logger.info(f"Failed: {metrics['failed']}")
    for name in metrics["failing"]:
        logger.info(f"  failing: {name}")
    logger.info(f"Bounds certified: {metrics['bounds_certified']}/{metrics['bounds']}")

    logger.info("\nTiming Metrics:")
    logger.info(f"Average Oracle Time: {metrics['timing']['average_time']:.3f} seconds")
    logger.info(f"Oracle Time Std Dev: {metrics['timing']['std_time']:.3f} seconds")
    logger.info(f"Fastest Oracle: {metrics['timing']['min_time']:.3f} seconds")
    logger.info(f"Slowest Oracle: {metrics['timing']['max_time']:.3f} seconds")
    logger.info(f"Total Run Time: {metrics['timing']['total_time']:.3f} seconds")
