#!/usr/bin/env python3
"""Regenerate the synthetic two-domain price fixture in data/fixtures/.

The fixture mimics the empirical layout: a dense daily source fuel
series, a sparse weekly target fuel series, and a shared daily crude
series used as covariate (lagged daily for the source, prior-week
average for the target). The target surface is wiggly in time so the
small training sample genuinely struggles, while the cross-domain bias
is a smooth trend in rescaled time, which standardization cannot absorb
but residual smoothing recovers easily. A few missing and nonnumeric
cells exercise the cleaning rules.
"""

from __future__ import annotations

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from lskr.datagen import StreamRng

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "data", "fixtures")
SEED = 20240521

N_DAYS = 1096  # three years starting 2019-01-01
WEEK_OFFSET = 6  # first weekly observation on 2019-01-07


def m_target(u: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Target regression surface on (rescaled time, normalized crude)."""
    return 3.2 + 1.1 * z + 0.3 * z * z + 0.65 * np.sin(3.0 * np.pi * u)


def bias(u: np.ndarray) -> np.ndarray:
    """Smooth cross-domain discrepancy (target minus source surface)."""
    return 0.6 + 0.8 * u


def main() -> None:
    rng = StreamRng(SEED)
    dates = np.datetime64("2019-01-01") + np.arange(N_DAYS)

    # Crude path: smooth seasonal swing plus a slow AR(1) ripple.
    t01 = np.arange(N_DAYS) / (N_DAYS - 1)
    ripple = np.empty(N_DAYS)
    eps = rng.stream(0, 0).normals(N_DAYS)
    ripple[0] = eps[0]
    for i in range(1, N_DAYS):
        ripple[i] = 0.97 * ripple[i - 1] + 0.25 * eps[i]
    crude = 55.0 + 12.0 * np.sin(2.6 * np.pi * t01 + 0.4) + 8.0 * t01 + 1.6 * ripple
    z = (crude - 45.0) / 30.0  # roughly unit scale for the surfaces

    # Source fuel: daily, one-day-lagged crude as driver, small noise.
    su = np.arange(1, N_DAYS) / (N_DAYS - 1)  # skip day 0 (no lag)
    sz = z[:-1]
    sy = m_target(su, sz) - bias(su) + 0.04 * rng.stream(1, 0).normals(N_DAYS - 1)
    source_dates = dates[1:]

    # Target fuel: weekly, prior-week crude average as driver.
    week_idx = np.arange(WEEK_OFFSET, N_DAYS, 7)
    tu = week_idx / (N_DAYS - 1)
    tz = np.array([z[max(0, i - 7) : i].mean() for i in week_idx])
    ty = m_target(tu, tz) + 0.09 * rng.stream(2, 0).normals(len(week_idx))
    target_dates = dates[week_idx]

    os.makedirs(OUT_DIR, exist_ok=True)

    crude_cells = [f"{v:.4f}" for v in crude]
    crude_cells[40] = ""  # single missing day, fillable
    crude_cells[41 + 160] = "n/a"  # nonnumeric entry
    for k in range(400, 405):  # five-day hole, stays missing
        crude_cells[k] = ""
    _write("crude_daily.csv", dates, crude_cells)

    source_cells = [f"{v:.4f}" for v in sy]
    source_cells[250] = ""  # short gap, filled from neighbors
    source_cells[251] = ""
    _write("source_daily.csv", source_dates, source_cells)

    target_cells = [f"{v:.4f}" for v in ty]
    target_cells[30] = "n/a"  # nonnumeric entry, filled from neighbors
    _write("target_weekly.csv", target_dates, target_cells)
    print(f"wrote fixture ({len(source_dates)} source, {len(target_dates)} target rows) to {OUT_DIR}")


def _write(name: str, dates: np.ndarray, cells: list[str]) -> None:
    path = os.path.join(OUT_DIR, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date,value\n")
        for d, c in zip(dates, cells):
            fh.write(f"{d},{c}\n")


if __name__ == "__main__":
    main()
