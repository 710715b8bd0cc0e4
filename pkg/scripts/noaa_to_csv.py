"""Reshape a NOAA monthly anomaly series into a year-by-month table.

The input is the ``Date,Anomaly`` CSV exported by NOAA Climate at a Glance,
with dates written as ``YYYYMM`` and optional header lines before the data.
The output has one row per complete year and one column per month, which is
the layout ``gpclust fit`` reads as 12 curves.

    python scripts/noaa_to_csv.py export.csv tests/data/noaa_north_pole_monthly.csv
"""

import argparse
import csv
import re
import sys
from collections import defaultdict

MONTHS = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]
ROW = re.compile(r"^\s*(\d{4})(\d{2})\s*,\s*([-+0-9.eE]+)\s*$")


def reshape(lines, first_year=None, last_year=None):
    table = defaultdict(dict)
    for line in lines:
        hit = ROW.match(line)
        if hit:
            year, month, value = int(hit[1]), int(hit[2]), float(hit[3])
            table[year][month] = value
    years = sorted(y for y, row in table.items() if len(row) == 12)
    if first_year is not None:
        years = [y for y in years if y >= first_year]
    if last_year is not None:
        years = [y for y in years if y <= last_year]
    return [(y, [table[y][m] for m in range(1, 13)]) for y in years]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source")
    ap.add_argument("out")
    ap.add_argument("--first-year", type=int)
    ap.add_argument("--last-year", type=int)
    args = ap.parse_args(argv)
    with open(args.source, encoding="utf-8") as fh:
        rows = reshape(fh, args.first_year, args.last_year)
    if not rows:
        print("no complete years found", file=sys.stderr)
        return 2
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["year", *MONTHS])
        for year, values in rows:
            w.writerow([year, *values])
    print(f"{len(rows)} years ({rows[0][0]}-{rows[-1][0]}) -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
