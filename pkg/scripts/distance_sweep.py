#!/usr/bin/env python3
"""Mean achievable rate versus source-to-destination ground distance."""

import argparse
import csv
import pathlib

from fdrelay import OutputRow, Scenario, SweepSpec, run_sweep

DISTANCES_M = (200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0, 900.0, 1000.0)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("results/distance_sweep.csv"))
    args = ap.parse_args()

    base = Scenario(trials=args.trials, master_seed=args.seed, workers=args.workers)
    rows = run_sweep(SweepSpec("distance_m", DISTANCES_M, base))

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(OutputRow.FIELDS)
        for row in rows:
            writer.writerow([getattr(row, f) for f in OutputRow.FIELDS])
    print(f"wrote {args.out} ({len(rows)} rows)")


if __name__ == "__main__":
    main()
