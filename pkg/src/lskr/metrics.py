"""Evaluation grids, fitted surfaces and error summaries.

A fitted surface lives on a rectangular grid over rescaled time and the
covariate axes; cells where the estimator had no data in its kernel
window are missing and stay missing (NaN plus mask). Error metrics
follow the robust conventions used throughout the experiments: squared
errors summarized by the grid median, with missing cells excluded and
counted, plus empirical L2/Linf losses for held-out predictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateInputError,
    EmptyInputError,
    NoDataError,
    ShapeError,
    ValidationError,
)


@dataclass(frozen=True)
class GridSpec:
    """Rectangular evaluation grid: ``n`` nodes per axis.

    ``u_range`` spans rescaled time, ``x_range`` holds one (lo, hi) pair
    per covariate axis.
    """

    n: int
    u_range: tuple[float, float] = (0.0, 1.0)
    x_range: tuple = ((0.0, 1.0),)

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError(f"grid needs at least 2 nodes per axis, got {self.n}")
        xr = self.x_range
        if len(xr) == 2 and np.isscalar(xr[0]):
            xr = (tuple(xr),)
        object.__setattr__(self, "x_range", tuple((float(lo), float(hi)) for lo, hi in xr))
        ranges = [tuple(self.u_range), *self.x_range]
        for lo, hi in ranges:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValidationError(f"grid range must satisfy lo < hi, got ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.x_range)

    def u_nodes(self) -> np.ndarray:
        return np.linspace(self.u_range[0], self.u_range[1], self.n)

    def x_nodes(self, axis: int = 0) -> np.ndarray:
        lo, hi = self.x_range[axis]
        return np.linspace(lo, hi, self.n)

    def axes(self) -> tuple[np.ndarray, ...]:
        return (self.u_nodes(), *(self.x_nodes(j) for j in range(self.dim)))


@dataclass(frozen=True)
class Surface:
    """Estimator values on a grid; missing cells are NaN with mask set.

    ``axes[0]`` holds the time nodes, the remaining entries one node
    vector per covariate axis; ``values`` has shape
    ``(len(axes[0]), len(axes[1]), ...)``.
    """

    axes: tuple[np.ndarray, ...]
    values: np.ndarray
    missing: np.ndarray

    def __post_init__(self):
        shape = tuple(len(a) for a in self.axes)
        if self.values.shape != shape or self.missing.shape != shape:
            raise ShapeError(
                f"surface arrays {self.values.shape} do not match axes {shape}"
            )

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())


def bilinear_interp(surface: Surface, point: tuple[float, float]) -> float:
    """Bilinear blend of the four grid corners enclosing ``point``.

    Returns NaN (the missing-cell signal) when any enclosing corner is
    missing. The point must lie inside the grid hull.
    """
    if len(surface.axes) != 2:
        raise ShapeError("bilinear interpolation requires a 2-d surface")
    u, x = point
    un, xn = surface.axes
    if not (un[0] <= u <= un[-1] and xn[0] <= x <= xn[-1]):
        raise ValidationError(f"query ({u}, {x}) outside the surface hull")
    iu = min(int(np.searchsorted(un, u, side="right")) - 1, len(un) - 2)
    ix = min(int(np.searchsorted(xn, x, side="right")) - 1, len(xn) - 2)
    iu = max(iu, 0)
    ix = max(ix, 0)
    fu = (u - un[iu]) / (un[iu + 1] - un[iu])
    fx = (x - xn[ix]) / (xn[ix + 1] - xn[ix])
    c = surface.values[iu : iu + 2, ix : ix + 2]
    # NaN corners propagate into the blend, which is exactly the signal.
    return float(
        (1 - fu) * (1 - fx) * c[0, 0]
        + (1 - fu) * fx * c[0, 1]
        + fu * (1 - fx) * c[1, 0]
        + fu * fx * c[1, 1]
    )


def _lower_median(values: np.ndarray) -> float:
    """Median taking the lower of the two central order statistics."""
    k = values.size
    return float(np.sort(values)[(k - 1) // 2])


def grid_median_error(
    est_surface: Surface, truth, grid: GridSpec
) -> tuple[float, int]:
    """Median squared deviation from ``truth`` over the grid nodes.

    ``truth`` is a callable (u, x) -> value that broadcasts over numpy
    arrays. Cells that are missing on the estimated surface (or whose
    interpolation touches a missing corner) are excluded and counted.
    When the surface was fitted on exactly this grid its node values are
    used directly; otherwise each node is bilinearly interpolated.
    """
    if grid.dim != 1 or len(est_surface.axes) != 2:
        raise ShapeError("grid median error is defined for one covariate axis")
    un, xn = grid.u_nodes(), grid.x_nodes()
    same_grid = np.array_equal(est_surface.axes[0], un) and np.array_equal(
        est_surface.axes[1], xn
    )
    if same_grid:
        est = est_surface.values
    else:
        est = np.empty((grid.n, grid.n))
        for i, u in enumerate(un):
            for j, x in enumerate(xn):
                est[i, j] = bilinear_interp(est_surface, (u, x))
    uu, xx = np.meshgrid(un, xn, indexing="ij")
    sq = (est - truth(uu, xx)) ** 2
    ok = np.isfinite(sq)
    n_missing = int((~ok).sum())
    if not ok.any():
        raise NoDataError("every grid cell is missing")
    return _lower_median(sq[ok]), n_missing


def test_losses(predictions, actuals) -> tuple[float, float]:
    """Empirical L2 (root mean squared error) and Linf (max abs error)."""
    p = np.asarray(predictions, dtype=np.float64)
    a = np.asarray(actuals, dtype=np.float64)
    if p.shape != a.shape:
        raise ShapeError(f"prediction/actual shapes differ: {p.shape} vs {a.shape}")
    if p.size == 0:
        raise EmptyInputError("losses need at least one prediction")
    err = p - a
    return float(np.sqrt(np.mean(err**2))), float(np.max(np.abs(err)))


def rate_slope(log_t, log_err) -> float:
    """Ordinary least-squares slope of log error on log sample size."""
    lt = np.asarray(log_t, dtype=np.float64)
    le = np.asarray(log_err, dtype=np.float64)
    if lt.shape != le.shape:
        raise ShapeError("rate_slope inputs must have equal length")
    if lt.size < 3:
        raise ValidationError("rate_slope needs at least 3 points")
    if np.ptp(lt) == 0.0:
        raise DegenerateInputError("all abscissa values are identical")
    return float(np.polyfit(lt, le, 1)[0])


@dataclass
class ErrorReport:
    """Per-configuration error summary across replications."""

    estimator_id: str
    family: str
    gamma: float
    per_replication_median: list[float]
    per_replication_missing: list[int] = field(default_factory=list)
    mean_of_medians: float = float("nan")
    n_missing_cells: int = 0

    def __post_init__(self):
        if not self.per_replication_missing:
            self.per_replication_missing = [0] * len(self.per_replication_median)
        self.mean_of_medians = float(np.mean(self.per_replication_median))
        self.n_missing_cells = int(sum(self.per_replication_missing))


REPORT_CSV_HEADER = "estimator,family,gamma,replication,median_sq_err,n_missing"


def reports_to_csv(reports: list[ErrorReport]) -> str:
    """One CSV row per replication, full round-trip float formatting."""
    lines = [REPORT_CSV_HEADER]
    for rep in reports:
        for i, (med, miss) in enumerate(
            zip(rep.per_replication_median, rep.per_replication_missing)
        ):
            lines.append(
                f"{rep.estimator_id},{rep.family},{rep.gamma!r},{i},{med!r},{miss}"
            )
    return "\n".join(lines) + "\n"
