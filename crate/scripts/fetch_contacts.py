"""Convert the primary-school contact data into the edge lists read by
`netate` (`data/contact_morning.csv`, `data/contact_midday.csv`).

The raw file is the primary-school temporal contact list released by the
SocioPatterns collaboration (www.sociopatterns.org). Download it manually;
each line is `t i j Ci Cj` with `t` in seconds, one line per 20-second
contact interval. Usage:

    python3 scripts/fetch_contacts.py primaryschool.csv data

Only the first day is used. Morning covers intervals before 12:00 and
midday covers 12:00 to 14:00, with the day's clock starting at 08:00 at
the first timestamp. Output rows are `i,j,count` with `i < j`.
"""

import argparse
import collections
import csv
import os

DAY_SECONDS = 86_400
DAY_START_HOUR = 8


def convert(path: str, out_dir: str) -> None:
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            parts = line.replace(",", " ").split()
            if len(parts) < 3 or not parts[0].isdigit():
                continue
            rows.append((int(parts[0]), int(parts[1]), int(parts[2])))
    if not rows:
        raise SystemExit(f"{path}: no contact rows found")
    t0 = min(t for t, _, _ in rows)
    windows = {
        "morning": (0, (12 - DAY_START_HOUR) * 3600),
        "midday": ((12 - DAY_START_HOUR) * 3600, (14 - DAY_START_HOUR) * 3600),
    }
    os.makedirs(out_dir, exist_ok=True)
    for period, (lo, hi) in windows.items():
        counts = collections.Counter()
        for t, i, j in rows:
            rel = t - t0
            if rel >= DAY_SECONDS or not lo <= rel < hi or i == j:
                continue
            counts[(min(i, j), max(i, j))] += 1
        target = os.path.join(out_dir, f"contact_{period}.csv")
        with open(target, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "count"])
            for (i, j), c in sorted(counts.items()):
                writer.writerow([i, j, c])
        print(f"{target}: {len(counts)} pairs")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("raw", help="downloaded temporal contact list")
    parser.add_argument("out_dir", nargs="?", default="data")
    args = parser.parse_args()
    convert(args.raw, args.out_dir)


if __name__ == "__main__":
    main()
