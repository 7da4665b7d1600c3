#!/usr/bin/env python3
"""Reproduce the private-synthesis scaling study and print the fit.

Example:
    python scripts/run_dp_scaling.py --dist gaussian --out gaussian.csv
"""

import argparse
import csv
import sys

from momentforge.dpsynth import expected_error_curve
from momentforge.experiments import (
    GENERATORS,
    loglog_slope,
    mean_w1_by_n,
    run_dp_scaling,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dist", default="gaussian", choices=GENERATORS)
    parser.add_argument("--nmin", type=int, default=128)
    parser.add_argument("--nmax", type=int, default=8192)
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--epsilon", type=float, default=0.5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    n_values = []
    n = args.nmin
    while n <= args.nmax:
        n_values.append(n)
        n *= 2
    rows = run_dp_scaling(args.dist, n_values, args.trials, args.epsilon, args.seed, jobs=args.jobs)

    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "trial", "w1", "expected_bound"])
            for row in rows:
                writer.writerow([row.n, row.trial, "%.17g" % row.w1, "%.17g" % row.expected_bound])

    ns, means = mean_w1_by_n(rows)
    print(f"{'n':>6} {'mean W1':>10} {'bound':>10} {'ratio':>7}")
    for n, mean in zip(ns, means):
        curve = expected_error_curve(n, args.epsilon, 1.0 / n**2)
        print(f"{n:>6} {mean:>10.5f} {curve:>10.5f} {mean / curve:>7.2f}")
    print(f"log-log slope: {loglog_slope(ns, means):.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
