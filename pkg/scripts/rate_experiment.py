#!/usr/bin/env python3
"""Error-versus-sample-size study for the target-only local linear fit.

Holds the curvature at zero, scales the bandwidth as h = c * T**(-1/6)
and records the grid-median squared error per replication, then prints
the log-log slope across the median curve.

Usage:
    python scripts/rate_experiment.py --out runs/rates [--jobs 2]
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from lskr.datagen import rate_curve
from lskr.metrics import rate_slope


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/rates")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--seed", type=int, default=20240901)
    parser.add_argument("--replications", type=int, default=30)
    parser.add_argument("--h-scale", type=float, default=0.5)
    parser.add_argument(
        "--t-values", default="500,1000,2000,4000", help="comma list of sample sizes"
    )
    args = parser.parse_args()

    t_values = tuple(int(v) for v in args.t_values.split(","))
    curves = rate_curve(
        t_values,
        replications=args.replications,
        base_seed=args.seed,
        h_scale=args.h_scale,
        jobs=args.jobs,
    )
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "rate_curve.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,replication,median_sq_err\n")
        for t in sorted(curves):
            for i, med in enumerate(curves[t]):
                fh.write(f"{t},{i},{med!r}\n")

    medians = [float(np.median(curves[t])) for t in sorted(curves)]
    slope = rate_slope(np.log(sorted(curves)), np.log(medians))
    print(f"medians by T: {dict(zip(sorted(curves), medians))}")
    print(f"log-log slope: {slope:.3f}")
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
