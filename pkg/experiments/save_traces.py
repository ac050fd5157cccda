"""
Save plot-ready numeric series from experiment reports as CSV.

Every value is an exact rational, written as separate numerator and denominator columns.
"""
import argparse
import csv
import io
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List

from src.config import logger

CSV_FIELDS = ("series", "index", "numerator", "denominator")


def series_row(series: str, index: int, value: Any) -> Dict[str, Any]:
    value = Fraction(value)
    return {
        "series": series,
        "index": index,
        "numerator": value.numerator,
        "denominator": value.denominator,
    }


def series_rows(series: str, values: Iterable[Any], start: int = 0) -> List[Dict[str, Any]]:
    return [series_row(series, i, v) for i, v in enumerate(values, start)]


def series_to_csv(rows: Iterable[Dict[str, Any]]) -> str:
    """CSV text with a fixed header; no rows gives the header alone."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row[k] for k in CSV_FIELDS})
    return buffer.getvalue()


def save_traces(report: Dict[str, Any], output_file: Path) -> int:
    """Write the series of ``report`` to ``output_file`` and return the row count."""
    rows = report.get("series", [])
    output_file.parent.mkdir(parents=True, exist_ok=True)
    output_file.write_text(series_to_csv(rows), encoding="utf-8")
    logger.info(f"Saved {len(rows)} trace rows to {output_file}")
    return len(rows)


def main():
    parser = argparse.ArgumentParser(description="Extract trace series from a report")
    parser.add_argument("report", type=Path, help="Path to a report.json")
    parser.add_argument("--output", type=Path, help="CSV path (default: next to the report)")
    args = parser.parse_args()

    try:
        with open(args.report, encoding="utf-8") as f:
            report = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Error reading {args.report}: {e}")
        raise
    save_traces(report, args.output or args.report.with_name("traces.csv"))


if __name__ == "__main__":
    main()
