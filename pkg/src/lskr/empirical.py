"""CSV ingestion and the two-domain empirical experiment pipeline.

A dense daily source series and a sparse weekly target series are
embedded into the same rescaled time interval: source times are rank
positions divided by the source length, target times are interpolated
from the source date-to-time map. Covariates always precede the
response (one-period lag, or the average over the prior inter-
observation window), the target splits deterministically into train and
test, and three estimators are compared on the held-out points:
target-only, bias-corrected transfer, and pooled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .bandwidth import CvPlan, blocked_cv_grid, cv_select
from .errors import (
    DataError,
    DegenerateInputError,
    InsufficientDataError,
    NoOverlapError,
    ShapeError,
    ValidationError,
)
from .estimators import Domain, KernelFit, Method, Sample
from .kernels import Bandwidth, KernelSpec
from .metrics import test_losses
from .transfer import fit_pooled, fit_transfer, pooled_union, residual_sample, tl_predict_batch

GAP_FILL_MAX = 3


@dataclass
class RawSeries:
    """Dated observations of one quantity; NaN marks missing values."""

    dates: np.ndarray
    values: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.dates.shape != self.values.shape or self.dates.ndim != 1:
            raise ShapeError("dates and values must be equal-length vectors")

    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)


def load_series(path: str, value_column: str = "value", source_id: str | None = None) -> RawSeries:
    """Read a ``date,value`` CSV; nonnumeric and empty cells become missing."""
    dates: list = []
    values: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "date" not in reader.fieldnames:
            raise DataError(f"{path}: expected a header containing a 'date' column")
        if value_column not in reader.fieldnames:
            raise DataError(f"{path}: no column named {value_column!r}")
        for row in reader:
            try:
                dates.append(np.datetime64(row["date"], "D"))
            except ValueError as exc:
                raise DataError(f"{path}: bad date {row['date']!r}") from exc
            cell = (row[value_column] or "").strip()
            try:
                values.append(float(cell))
            except ValueError:
                values.append(math.nan)
    if not dates:
        raise InsufficientDataError(f"{path}: no data rows")
    return RawSeries(np.array(dates), np.array(values), source_id or path)


def clean_series(raw: RawSeries, gap_fill_max: int = GAP_FILL_MAX) -> RawSeries:
    """Sort by date, fill short gaps with the mean of the flanking values.

    Runs of up to ``gap_fill_max`` consecutive missing values between
    two observed ones are filled; longer runs and edge runs stay
    missing, and their rows are excluded downstream. Observed values are
    never modified.
    """
    order = np.argsort(raw.dates, kind="stable")
    dates = raw.dates[order]
    values = raw.values[order].copy()
    _, first = np.unique(dates, return_index=True)
    dates, values = dates[first], values[first]

    isnan = ~np.isfinite(values)
    i = 0
    n = len(values)
    while i < n:
        if not isnan[i]:
            i += 1
            continue
        j = i
        while j < n and isnan[j]:
            j += 1
        run = j - i
        if 0 < i and j < n and run <= gap_fill_max:
            values[i:j] = 0.5 * (values[i - 1] + values[j])
        i = j

    if int(np.isfinite(values).sum()) < 10:
        raise InsufficientDataError(
            f"{raw.source_id}: fewer than 10 valid rows after cleaning"
        )
    return RawSeries(dates, values, raw.source_id)


@dataclass
class DomainTriples:
    """Per-domain rows of the harmonized experiment: date, u, x, y."""

    dates: np.ndarray
    u: np.ndarray
    y: np.ndarray
    x: np.ndarray | None = None


@dataclass
class HarmonizedPair:
    """Both domains on the common rescaled time interval.

    The source map (date -> u) is the piecewise-linear interpolant of
    the source order statistics; target times are its values at the
    target dates.
    """

    source: DomainTriples
    target: DomainTriples
    n_dropped_target: int = 0


def _valid_rows(series: RawSeries) -> tuple[np.ndarray, np.ndarray]:
    mask = series.valid()
    return series.dates[mask], series.values[mask]


def harmonize(source_daily: RawSeries, target_weekly: RawSeries) -> HarmonizedPair:
    """Assign source times t/T by date order and interpolate target times."""
    sd, sy = _valid_rows(source_daily)
    td, ty = _valid_rows(target_weekly)
    if len(sd) == 0 or len(td) == 0:
        raise InsufficientDataError("harmonize needs nonempty cleaned series")
    t1 = len(sd)
    su = np.arange(1, t1 + 1) / t1

    inside = (td >= sd[0]) & (td <= sd[-1])
    n_dropped = int((~inside).sum())
    if not inside.any():
        raise NoOverlapError("no target date falls inside the source date range")
    td, ty = td[inside], ty[inside]
    tu = np.interp(td.astype("int64"), sd.astype("int64"), su)
    return HarmonizedPair(
        source=DomainTriples(dates=sd, u=su, y=sy),
        target=DomainTriples(dates=td, u=tu, y=ty),
        n_dropped_target=n_dropped,
    )


def lagged_covariate(domain_dates: np.ndarray, series: RawSeries) -> tuple[np.ndarray, np.ndarray]:
    """One-period lag of ``series`` date-joined onto ``domain_dates``.

    Returns (kept row indices, covariate values). Rows without a joined
    value and the first joined row (undefined lag) are dropped.
    """
    sd, sv = _valid_rows(series)
    lookup = {d.astype("int64"): v for d, v in zip(sd.astype("datetime64[D]"), sv)}
    joined_idx = []
    joined_val = []
    for i, d in enumerate(domain_dates.astype("int64")):
        if int(d) in lookup:
            joined_idx.append(i)
            joined_val.append(lookup[int(d)])
    if len(joined_idx) < 2:
        raise InsufficientDataError("covariate series shares too few dates with the domain")
    keep = np.asarray(joined_idx[1:], dtype=int)
    x = np.asarray(joined_val[:-1], dtype=np.float64)
    return keep, x


def window_average_covariate(
    target_dates: np.ndarray, series: RawSeries
) -> tuple[np.ndarray, np.ndarray]:
    """Mean of ``series`` over each prior inter-observation window.

    Row t gets the average of the series values with dates in
    [date_{t-1}, date_t); the first row has no prior window and is
    dropped, as are rows whose window holds no observation.
    """
    sd, sv = _valid_rows(series)
    sd64 = sd.astype("int64")
    td64 = target_dates.astype("int64")
    keep = []
    xs = []
    for t in range(1, len(td64)):
        lo = np.searchsorted(sd64, td64[t - 1], side="left")
        hi = np.searchsorted(sd64, td64[t], side="left")
        if hi > lo:
            keep.append(t)
            xs.append(float(sv[lo:hi].mean()))
    if not keep:
        raise InsufficientDataError("no prior-window averages could be formed")
    return np.asarray(keep, dtype=int), np.asarray(xs, dtype=np.float64)


def build_covariates(
    pair: HarmonizedPair,
    mode: str,
    crude: RawSeries | None = None,
    source_related: RawSeries | None = None,
    target_related: RawSeries | None = None,
) -> HarmonizedPair:
    """Attach covariate columns to both domains.

    mode "crude": the source uses the lagged daily series, the target
    the average over each prior weekly window, both from ``crude``.
    mode "related": each domain uses the one-period lag of its own
    related series.
    """
    if mode == "crude":
        if crude is None:
            raise ValidationError("mode 'crude' needs the crude price series")
        s_keep, s_x = lagged_covariate(pair.source.dates, crude)
        t_keep, t_x = window_average_covariate(pair.target.dates, crude)
    elif mode == "related":
        if source_related is None or target_related is None:
            raise ValidationError("mode 'related' needs one related series per domain")
        s_keep, s_x = lagged_covariate(pair.source.dates, source_related)
        t_keep, t_x = lagged_covariate(pair.target.dates, target_related)
    else:
        raise ValidationError(f"unknown covariate mode {mode!r}")

    def _filtered(dom: DomainTriples, keep: np.ndarray, x: np.ndarray) -> DomainTriples:
        return DomainTriples(
            dates=dom.dates[keep], u=dom.u[keep], y=dom.y[keep], x=x
        )

    return HarmonizedPair(
        source=_filtered(pair.source, s_keep, s_x),
        target=_filtered(pair.target, t_keep, t_x),
        n_dropped_target=pair.n_dropped_target,
    )


@dataclass(frozen=True)
class RescaleParams:
    lo: float
    span: float

    def forward(self, x):
        return (np.asarray(x) - self.lo) / self.span

    def inverse(self, x01):
        return np.asarray(x01) * self.span + self.lo


def rescale_covariates(pair: HarmonizedPair) -> tuple[HarmonizedPair, dict[str, RescaleParams]]:
    """Min-max rescale each domain's covariate column onto [0, 1]."""
    params = {}
    domains = {}
    for name, dom in (("source", pair.source), ("target", pair.target)):
        if dom.x is None:
            raise ValidationError("covariates must be built before rescaling")
        span = float(dom.x.max() - dom.x.min())
        if span <= 0.0:
            raise DegenerateInputError(f"{name} covariate has zero spread")
        p = RescaleParams(lo=float(dom.x.min()), span=span)
        params[name] = p
        domains[name] = replace(dom, x=p.forward(dom.x))
    return (
        HarmonizedPair(
            source=domains["source"],
            target=domains["target"],
            n_dropped_target=pair.n_dropped_target,
        ),
        params,
    )


def to_samples(pair: HarmonizedPair) -> tuple[Sample, Sample]:
    """Turn harmonized triples into (target, source) samples."""
    tgt = Sample(
        u=pair.target.u, x=pair.target.x, y=pair.target.y, domain_label=Domain.TARGET
    )
    src = Sample(
        u=pair.source.u, x=pair.source.x, y=pair.source.y, domain_label=Domain.SOURCE
    )
    return tgt, src


def split_every_fourth(sample: Sample) -> tuple[Sample, Sample]:
    """Deterministic split: every fourth observation (1-based) is test."""
    n = len(sample)
    if n < 4:
        raise ValidationError("need at least 4 observations to split")
    idx = np.arange(1, n + 1)
    test = idx % 4 == 0
    make = lambda m: Sample(
        u=sample.u[m], x=sample.x[m], y=sample.y[m], domain_label=sample.domain_label
    )
    return make(~test), make(test)


@dataclass
class EstimatorScore:
    l2: float
    linf: float
    n_unscored: int = 0


@dataclass
class EmpiricalResult:
    """Loss table plus audit artifacts of one empirical run."""

    scores: dict[tuple[str, str], EstimatorScore]
    predictions: dict[str, dict[str, np.ndarray]]
    train: Sample
    test: Sample
    source: Sample
    bandwidths: dict[tuple[str, str], Bandwidth]
    rescale: dict[str, RescaleParams]
    n_dropped_target: int


ESTIMATOR_ROWS = ("baseline", "transfer", "pooled")


def run_empirical(
    target_response: RawSeries,
    source_response: RawSeries,
    mode: str,
    crude: RawSeries | None = None,
    source_related: RawSeries | None = None,
    target_related: RawSeries | None = None,
    spec: KernelSpec | None = None,
    folds: int = 10,
    cv_per_axis: int = 8,
    gap_fill_max: int = GAP_FILL_MAX,
) -> EmpiricalResult:
    """Full pipeline: clean, harmonize, covariates, split, fit, score."""
    spec = spec or KernelSpec()
    clean = lambda s: clean_series(s, gap_fill_max=gap_fill_max) if s is not None else None
    pair = harmonize(clean(source_response), clean(target_response))
    pair = build_covariates(
        pair,
        mode,
        crude=clean(crude),
        source_related=clean(source_related),
        target_related=clean(target_related),
    )
    pair, rescale = rescale_covariates(pair)
    target, source = to_samples(pair)
    train, test = split_every_fourth(target)

    def _cv(sample: Sample, method: Method) -> Bandwidth:
        plan = CvPlan(
            grid=tuple(blocked_cv_grid(sample, folds, per_axis=cv_per_axis)),
            folds=folds,
            method=method,
        )
        return cv_select(sample, spec, plan).best

    scores: dict[tuple[str, str], EstimatorScore] = {}
    bandwidths: dict[tuple[str, str], Bandwidth] = {}
    predictions: dict[str, dict[str, np.ndarray]] = {}
    for method in (Method.NW, Method.LL):
        bw_t = _cv(train, method)
        baseline = KernelFit(train, spec, bw_t, method)
        bandwidths[("baseline", method.value)] = bw_t

        h1 = _cv(source, method)
        resid, _ = residual_sample(train, KernelFit(source, spec, h1, method))
        h_tl = _cv(resid, method)
        tfit = fit_transfer(train, source, spec, h1, h_tl, method)
        bandwidths[("transfer", method.value)] = h_tl

        union = pooled_union(train, source)
        bw_p = _cv(union, method)
        pooled = fit_pooled(train, source, spec, bw_p, method)
        bandwidths[("pooled", method.value)] = bw_p

        preds = {"u": test.u, "x": test.x[:, 0], "y_true": test.y}
        base_fit = baseline.predict_batch(test.u, test.x)
        tl_vals, tl_ok = tl_predict_batch(tfit, test.u, test.x)
        pool_fit = pooled.predict_batch(test.u, test.x)
        preds["y_baseline"] = np.where(base_fit.ok, base_fit.values, np.nan)
        preds["y_transfer"] = np.where(tl_ok, tl_vals, np.nan)
        preds["y_pooled"] = np.where(pool_fit.ok, pool_fit.values, np.nan)
        predictions[method.value] = preds

        for row, vals in (
            ("baseline", preds["y_baseline"]),
            ("transfer", preds["y_transfer"]),
            ("pooled", preds["y_pooled"]),
        ):
            ok = np.isfinite(vals)
            l2, linf = test_losses(vals[ok], test.y[ok])
            scores[(row, method.value)] = EstimatorScore(
                l2=l2, linf=linf, n_unscored=int((~ok).sum())
            )

    return EmpiricalResult(
        scores=scores,
        predictions=predictions,
        train=train,
        test=test,
        source=source,
        bandwidths=bandwidths,
        rescale=rescale,
        n_dropped_target=pair.n_dropped_target,
    )
