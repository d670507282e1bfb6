"""Brute-force counts over the fixture crime CSV.

Deliberately independent of the package: reads the CSV with the csv module
and counts with plain loops, so query results can be checked against it.

    python tests/oracles/crime_counts.py [path/to/crime.csv]
"""

from __future__ import annotations

import csv
import sys
from collections import Counter
from pathlib import Path

DEFAULT_CSV = Path(__file__).resolve().parents[2] / "src" / "claimcheck" / "fixtures" / "crime.csv"


def load(path=DEFAULT_CSV):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def year_category_counts(rows, years=(2023, 2024), categories=("PROPERTY CRIME", "VIOLENT CRIME")):
    """(year, category) -> count, keyed on the offense date."""
    counts = Counter()
    for r in rows:
        year = int(r["offense_date"][0:4])
        if year in years and r["offense_category"] in categories:
            counts[(year, r["offense_category"])] += 1
    return dict(sorted(counts.items()))


def summer_sector_counts(rows, sector="M", category="VIOLENT CRIME", years=(2024, 2025)):
    """year -> count of reports in June-August, keyed on the report timestamp."""
    counts = Counter()
    for r in rows:
        year, month = int(r["report_datetime"][0:4]), int(r["report_datetime"][5:7])
        if r["sector"] == sector and r["offense_category"] == category and 6 <= month <= 8 and year in years:
            counts[year] += 1
    return dict(sorted(counts.items()))


def null_share(rows, column="neighborhood"):
    return sum(1 for r in rows if r[column] == "") / len(rows)


if __name__ == "__main__":
    data = load(sys.argv[1] if len(sys.argv) > 1 else DEFAULT_CSV)
    for (year, cat), n in year_category_counts(data).items():
        print(year, cat, n)
    for year, n in summer_sector_counts(data).items():
        print(year, "sector M violent Jun-Aug", n)
    print("neighborhood null share", round(null_share(data), 3))
