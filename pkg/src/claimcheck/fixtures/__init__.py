"""Synthetic fixture data: a small city crime table, a transit table, and their configs.

The crime rows are generated from a fixed seed and committed as ``crime.csv``;
the sqlite databases are rebuilt from that CSV on demand.
"""

from __future__ import annotations

import csv
import datetime as _dt
import random
import sqlite3
from dataclasses import dataclass
from pathlib import Path

FIXTURE_DIR = Path(__file__).resolve().parent
CRIME_CSV = FIXTURE_DIR / "crime.csv"
TRANSCRIPT_DIR = FIXTURE_DIR / "transcripts"
BENCH_TRANSCRIPT_DIR = FIXTURE_DIR / "bench_transcripts"
BENCH_CASES = FIXTURE_DIR / "bench_cases.jsonl"
TOOLBOX_EXAMPLE = FIXTURE_DIR / "toolbox_example.yaml"

PROPERTY, VIOLENT, OTHER = "PROPERTY CRIME", "VIOLENT CRIME", "ALL OTHER"

CRIME_COLUMNS = ("offense_id", "report_number", "offense_date", "report_datetime", "offense_category",
                 "nibrs_group_ab", "offense", "beat", "sector", "precinct", "neighborhood")

BEATS = {
    "M1": ("M", "West"), "M2": ("M", "West"), "M3": ("M", "West"),
    "K1": ("K", "West"), "K2": ("K", "West"), "K3": ("K", "West"),
    "E1": ("E", "East"), "E2": ("E", "East"), "E3": ("E", "East"),
    "B1": ("B", "North"), "B2": ("B", "North"), "B3": ("B", "North"),
    "N1": ("N", "North"), "N2": ("N", "North"),
}
NEIGHBORHOODS = ("DOWNTOWN COMMERCIAL", "BELLTOWN", "PIONEER SQUARE", "CAPITOL HILL", "BALLARD NORTH",
                 "FREMONT", "QUEEN ANNE", "CENTRAL AREA/SQUIRE PARK")
OFFENSES = {
    PROPERTY: ("BURGLARY/BREAKING&ENTERING", "MOTOR VEHICLE THEFT", "ALL OTHER LARCENY", "SHOPLIFTING"),
    VIOLENT: ("AGGRAVATED ASSAULT", "ROBBERY", "SIMPLE ASSAULT"),
    OTHER: ("TRESPASS OF REAL PROPERTY", "DRUG/NARCOTIC VIOLATIONS", "DESTRUCTION/DAMAGE/VANDALISM OF PROPERTY"),
}

# (offense year, category, count, placement).  Placement "msummer" puts the
# report time in June-August with a sector M beat; "mwinter" keeps sector M
# but reports before May; "elsewhere" avoids sector M entirely; "any" is free.
CRIME_PLAN = (
    (2022, PROPERTY, 12, "any"), (2022, VIOLENT, 6, "any"),
    (2023, PROPERTY, 41, "any"), (2023, VIOLENT, 121, "any"), (2023, OTHER, 15, "any"),
    (2024, PROPERTY, 43, "any"), (2024, VIOLENT, 105, "msummer"), (2024, VIOLENT, 17, "elsewhere"),
    (2024, VIOLENT, 6, "mwinter"), (2024, OTHER, 14, "any"),
    (2025, PROPERTY, 20, "any"), (2025, VIOLENT, 67, "msummer"), (2025, VIOLENT, 9, "elsewhere"),
    (2025, VIOLENT, 5, "mwinter"), (2025, OTHER, 6, "any"),
)

SEED = 20240101


def _day(rng: random.Random, year: int, first: tuple[int, int], last: tuple[int, int]) -> _dt.date:
    lo, hi = _dt.date(year, *first), _dt.date(year, *last)
    return lo + _dt.timedelta(days=rng.randrange((hi - lo).days + 1))


def crime_rows(seed: int = SEED) -> list[dict[str, str]]:
    """Generate the crime table; offense ids follow report time."""
    rng = random.Random(seed)
    raw = []
    m_beats = [b for b, (s, _) in BEATS.items() if s == "M"]
    other_beats = [b for b, (s, _) in BEATS.items() if s != "M"]
    for year, category, count, placement in CRIME_PLAN:
        for _ in range(count):
            if placement == "msummer":
                reported = _day(rng, year, (6, 1), (8, 31))
                offense = reported - _dt.timedelta(days=rng.randrange(3))
                beat = rng.choice(m_beats)
            else:
                if placement == "mwinter":
                    offense, beat = _day(rng, year, (1, 1), (4, 25)), rng.choice(m_beats)
                elif placement == "elsewhere":
                    offense, beat = _day(rng, year, (1, 1), (12, 31)), rng.choice(other_beats)
                else:
                    offense, beat = _day(rng, year, (1, 1), (12, 31)), rng.choice(sorted(BEATS))
                reported = offense + _dt.timedelta(days=rng.randrange(4))
            ts = _dt.datetime.combine(reported, _dt.time(rng.randrange(24), rng.randrange(60), rng.randrange(60)))
            sector, precinct = BEATS[beat]
            raw.append({
                "offense_date": offense.isoformat(),
                "report_datetime": ts.strftime("%Y-%m-%d %H:%M:%S"),
                "offense_category": category,
                "nibrs_group_ab": "B" if category == OTHER else "A",
                "offense": rng.choice(OFFENSES[category]),
                "beat": beat, "sector": sector, "precinct": precinct,
                "neighborhood": rng.choice(NEIGHBORHOODS) if rng.random() < 0.5 else "",
            })
    raw.sort(key=lambda r: (r["report_datetime"], r["offense_date"], r["offense"]))
    rows = []
    for i, r in enumerate(raw, 1):
        rows.append({"offense_id": str(i), "report_number": f"{r['report_datetime'][:4]}-{i:06d}", **r})
    return rows


def write_crime_csv(path: str | Path = CRIME_CSV, seed: int = SEED) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CRIME_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(crime_rows(seed))
    return path


def read_crime_csv(path: str | Path = CRIME_CSV) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


CRIME_DDL = """\
CREATE TABLE beats (
    beat TEXT PRIMARY KEY,
    sector TEXT NOT NULL,
    precinct TEXT NOT NULL
);
CREATE TABLE crime_data (
    offense_id INTEGER PRIMARY KEY,
    report_number TEXT NOT NULL,
    offense_date DATE,
    report_datetime TIMESTAMP NOT NULL,
    offense_category TEXT NOT NULL,
    nibrs_group_ab TEXT,
    offense TEXT NOT NULL,
    beat TEXT REFERENCES beats(beat),
    sector TEXT,
    precinct TEXT,
    neighborhood TEXT
);
"""


def build_crime_db(db_path: str | Path, csv_path: str | Path = CRIME_CSV) -> Path:
    """Load the crime CSV into a fresh sqlite file; blank cells become NULL."""
    db_path = Path(db_path)
    if db_path.exists():
        db_path.unlink()
    rows = read_crime_csv(csv_path)
    conn = sqlite3.connect(db_path)
    try:
        with conn:
            conn.executescript(CRIME_DDL)
            conn.executemany("INSERT INTO beats VALUES (?, ?, ?)",
                             [(b, s, p) for b, (s, p) in sorted(BEATS.items())])
            cols = ", ".join(CRIME_COLUMNS)
            marks = ", ".join("?" for _ in CRIME_COLUMNS)
            conn.executemany(
                f"INSERT INTO crime_data ({cols}) VALUES ({marks})",
                [[int(r["offense_id"])] + [r[c] or None for c in CRIME_COLUMNS[1:]] for r in rows])
    finally:
        conn.close()
    return db_path


TRANSIT_DDL = """\
CREATE TABLE routes (
    route_id TEXT PRIMARY KEY,
    route_name TEXT NOT NULL,
    mode TEXT NOT NULL
);
CREATE TABLE monthly_boardings (
    route_id TEXT NOT NULL REFERENCES routes(route_id),
    service_month TEXT NOT NULL,
    boardings INTEGER NOT NULL,
    PRIMARY KEY (route_id, service_month)
);
"""

ROUTES = (("1L", "1 Line", "light rail"), ("C", "RapidRide C", "bus"), ("E", "RapidRide E", "bus"),
          ("SLU", "South Lake Union Streetcar", "streetcar"))


def build_transit_db(db_path: str | Path, seed: int = SEED) -> Path:
    db_path = Path(db_path)
    if db_path.exists():
        db_path.unlink()
    rng = random.Random(seed + 1)
    base = {"1L": 2_000_000, "C": 260_000, "E": 310_000, "SLU": 45_000}
    rows = []
    for route, _, _ in ROUTES:
        for year in (2023, 2024):
            for month in range(1, 13):
                rows.append((route, f"{year}-{month:02d}", base[route] + rng.randrange(-base[route] // 10,
                                                                                         base[route] // 10)))
    conn = sqlite3.connect(db_path)
    try:
        with conn:
            conn.executescript(TRANSIT_DDL)
            conn.executemany("INSERT INTO routes VALUES (?, ?, ?)", ROUTES)
            conn.executemany("INSERT INTO monthly_boardings VALUES (?, ?, ?)", rows)
    finally:
        conn.close()
    return db_path


WORKSPACE_CONFIG = """\
sources:
  seattle:
    kind: sqlite
    database: {seattle}
  transit:
    kind: sqlite
    database: {transit}

tools:
  seattle_sql:
    kind: sqlite-execute-sql
    source: seattle
    description: Run read-only SQL against the Seattle city database.
  seattle_list_tables:
    kind: list-tables
    source: seattle
    description: List the tables of the Seattle city database.
  seattle_describe_table:
    kind: describe-table
    source: seattle
    description: Describe one table of the Seattle city database.
  transit_sql:
    kind: sqlite-execute-sql
    source: transit
    description: Run read-only SQL against the regional transit database.
  transit_list_tables:
    kind: list-tables
    source: transit
    description: List the tables of the regional transit database.
  transit_describe_table:
    kind: describe-table
    source: transit
    description: Describe one table of the regional transit database.

toolsets:
  schema-tools:
    - seattle_list_tables
    - seattle_describe_table
    - transit_list_tables
    - transit_describe_table
  sql-tools:
    - seattle_sql
    - transit_sql

agents:
  schema_toolset: schema-tools
  sql_toolset: sql-tools
  prices:
    gpt-5: {{input: "1.25", output: "10.00"}}
    gpt-5-mini: {{input: "0.25", output: "2.00"}}
"""


@dataclass(frozen=True)
class Workspace:
    root: Path
    config: Path
    seattle_db: Path
    transit_db: Path


def write_workspace(root: str | Path, *, relative: bool = False) -> Workspace:
    """Build both databases and a config under ``root``.

    With ``relative`` the config names the database files relative to
    ``root``, which then has to be the working directory when it is loaded.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    seattle = build_crime_db(root / "seattle.sqlite")
    transit = build_transit_db(root / "transit.sqlite")
    names = ({"seattle": "seattle.sqlite", "transit": "transit.sqlite"} if relative
             else {"seattle": str(seattle.resolve()), "transit": str(transit.resolve())})
    config = root / "claimcheck.yaml"
    config.write_text(WORKSPACE_CONFIG.format(**{k: f'"{v}"' for k, v in names.items()}), encoding="utf-8")
    return Workspace(root, config, seattle, transit)
