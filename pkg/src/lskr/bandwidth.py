"""Bandwidth selection by blocked k-fold least-squares cross-validation.

Folds are contiguous index blocks rather than random shuffles: the data
are serially dependent, and blocked folds keep the leakage across the
fold boundary local. Held-out points whose kernel window is empty are
skipped (and counted), not scored as infinite, so small candidates near
the boundary are not eliminated unfairly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._engine import batch_predict
from .errors import (
    DegenerateInputError,
    SelectionFailureError,
    ValidationError,
)
from .estimators import Method, Sample
from .kernels import Bandwidth, KernelSpec

# Scores this close to the minimum count as ties; exact float equality
# would never trigger on the all-candidates-exact case the tie rule is
# for (noiseless data fitted exactly by every candidate).
TIE_TOL = 1e-12


@dataclass(frozen=True)
class CvPlan:
    """Cross-validation layout: fold count, candidate grid, fit method."""

    grid: tuple[Bandwidth, ...]
    folds: int = 10
    fold_scheme: str = "contiguous_blocks"
    method: Method = Method.LL
    tie_tol: float = TIE_TOL

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        if self.folds < 2:
            raise ValidationError(f"need at least 2 folds, got {self.folds}")
        if not self.grid:
            raise ValidationError("candidate grid is empty")
        if self.fold_scheme != "contiguous_blocks":
            raise ValidationError(f"unknown fold scheme: {self.fold_scheme!r}")


@dataclass
class CvResult:
    """Selected bandwidth plus the full candidate score table."""

    best: Bandwidth
    scores: dict[Bandwidth, float]
    n_skipped: int = 0


def fold_blocks(n: int, folds: int) -> list[np.ndarray]:
    """Contiguous index blocks; earlier blocks absorb the remainder."""
    return [b for b in np.array_split(np.arange(n), folds)]


def cv_select(sample: Sample, spec: KernelSpec, plan: CvPlan) -> CvResult:
    """Score every candidate on held-out blocks and pick the argmin.

    Each held-out point is predicted from the remaining folds; a
    candidate's score is the mean squared error over all scoreable
    points. Ties within ``tie_tol`` of the minimum resolve toward the
    larger time bandwidth, then the larger covariate bandwidth.
    """
    n = len(sample)
    if n < plan.folds:
        raise ValidationError(f"sample of length {n} cannot form {plan.folds} folds")
    blocks = fold_blocks(n, plan.folds)

    sq_sums = np.zeros(len(plan.grid))
    n_scored = np.zeros(len(plan.grid), dtype=int)
    n_skip = np.zeros(len(plan.grid), dtype=int)
    for block in blocks:
        mask = np.ones(n, dtype=bool)
        mask[block] = False
        # Removing a contiguous block keeps the training times sorted.
        u_tr, x_tr, y_tr = sample.u[mask], sample.x[mask], sample.y[mask]
        u_te, x_te, y_te = sample.u[block], sample.x[block], sample.y[block]
        for c, cand in enumerate(plan.grid):
            fit = batch_predict(
                u_tr, x_tr, y_tr, u_te, x_te, spec, cand, plan.method.value
            )
            ok = fit.ok
            sq_sums[c] += float(((fit.values[ok] - y_te[ok]) ** 2).sum())
            n_scored[c] += int(ok.sum())
            n_skip[c] += int((~ok).sum())

    scores = np.where(n_scored > 0, sq_sums / np.maximum(n_scored, 1), np.inf)
    if not np.any(np.isfinite(scores)):
        raise SelectionFailureError("every candidate left all held-out points unscored")

    tied = scores <= scores[np.isfinite(scores)].min() + plan.tie_tol
    order = [(cand.h_time, cand.h_cov) for cand in plan.grid]
    best_idx = max(np.flatnonzero(tied), key=lambda i: order[i])
    return CvResult(
        best=plan.grid[best_idx],
        scores={cand: float(s) for cand, s in zip(plan.grid, scores)},
        n_skipped=int(n_skip[best_idx]),
    )


def default_grid(
    sample: Sample,
    per_axis: int = 8,
    rel_range: tuple[float, float] = (0.02, 0.5),
) -> list[Bandwidth]:
    """Log-spaced candidates per axis, scaled by the axis range, crossed.

    The time axis and each covariate axis get ``per_axis`` values in
    ``rel_range`` times the observed spread of that axis; pairs are the
    cross product of the time values with the (synchronized) covariate
    values.
    """
    spans = [float(np.ptp(sample.u))]
    spans += [float(np.ptp(sample.x[:, j])) for j in range(sample.dim)]
    for j, span in enumerate(spans):
        if span <= 0.0:
            axis = "time" if j == 0 else f"covariate {j - 1}"
            raise DegenerateInputError(f"{axis} axis has zero spread")
    lo, hi = rel_range
    ladders = [np.geomspace(lo * span, hi * span, per_axis) for span in spans]
    if sample.dim == 0:
        return [Bandwidth(float(ht), ()) for ht in ladders[0]]
    grid = []
    for ht in ladders[0]:
        for k in range(per_axis):
            grid.append(Bandwidth(float(ht), tuple(float(lad[k]) for lad in ladders[1:])))
    return grid


def blocked_cv_grid(
    sample: Sample,
    folds: int,
    per_axis: int = 8,
    rel_range: tuple[float, float] = (0.02, 0.5),
) -> list[Bandwidth]:
    """Candidate grid whose time ladder starts at the fold-block scale.

    With contiguous folds, a time bandwidth below half the block width
    leaves interior held-out points without any training mass: only the
    easy block-edge points get scored and tiny candidates win on a
    shrunken, unrepresentative point set. Flooring the time ladder at
    0.6/folds of the time span keeps every candidate's score comparable.
    The covariate ladders are unaffected (folds are not blocked in x).
    """
    lo, hi = rel_range
    lo_t = min(max(lo, 0.6 / folds), hi * 0.999)
    time_span = float(np.ptp(sample.u))
    if time_span <= 0.0:
        raise DegenerateInputError("time axis has zero spread")
    time_ladder = np.geomspace(lo_t * time_span, hi * time_span, per_axis)
    base = default_grid(sample, per_axis=per_axis, rel_range=rel_range)
    grid = []
    for i, ht in enumerate(time_ladder):
        for k in range(per_axis):
            grid.append(Bandwidth(float(ht), base[i * per_axis + k].h_cov))
    return grid
