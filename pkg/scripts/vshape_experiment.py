#!/usr/bin/env python3
"""Run the replicated bias-curvature sweep and write its CSV outputs.

Desk-scale defaults reproduce the qualitative picture in minutes: both
transfer estimators trace a V over the curvature parameter while the
target-only estimators stay flat. Pass --paper-scale for the full-size
configuration (much slower).

Usage:
    python scripts/vshape_experiment.py --out runs/vshape [--jobs 2]
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from lskr.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/vshape")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--seed", type=int, default=20240901)
    parser.add_argument("--paper-scale", action="store_true")
    parser.add_argument("--families", default="quad")
    args = parser.parse_args()

    cli_args = [
        "simulate",
        "--seed", str(args.seed),
        "--jobs", str(args.jobs),
        "--families", args.families,
        "--out", args.out,
    ]
    if args.paper_scale:
        cli_args.append("--paper-scale")
    return cli_main(cli_args)


if __name__ == "__main__":
    raise SystemExit(main())
