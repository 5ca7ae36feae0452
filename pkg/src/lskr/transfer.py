"""Bias-corrected transfer estimators, the pooled baseline and the
oracle bandwidth/rate calculator.

The transfer estimator is built in three steps: fit the dense source
sample, smooth the target residuals against that fit to estimate the
cross-domain bias surface, and predict as source fit plus bias fit. The
pooled baseline instead standardizes the source responses to the target
training moments and fits the union sample directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateInputError,
    EmptyWindowError,
    TransferInfeasibleError,
    ValidationError,
)
from .estimators import Domain, KernelFit, LocalFit, Method, Sample
from .kernels import Bandwidth, KernelSpec
from .metrics import GridSpec, Surface


@dataclass(frozen=True)
class BiasSmoothness:
    """User-supplied bounds on the bias gradient and Hessian norms."""

    eta1: float
    eta2: float

    def __post_init__(self):
        if self.eta1 < 0.0 or self.eta2 < 0.0:
            raise ValidationError("smoothness constants must be nonnegative")


@dataclass(frozen=True)
class TransferFit:
    """Composite estimator: frozen source fit plus frozen bias fit."""

    source_fit: KernelFit
    bias_fit: KernelFit
    method: Method
    n_residual_skipped: int = 0


def residual_sample(target: Sample, source_fit: KernelFit) -> tuple[Sample, int]:
    """Target responses minus the source fit at the target points.

    Target observations where the source window is empty are dropped and
    counted rather than failing the whole construction.
    """
    fit = source_fit.predict_batch(target.u, target.x)
    ok = fit.ok
    n_skipped = int((~ok).sum())
    if n_skipped > 0.5 * len(target):
        raise TransferInfeasibleError(
            f"source fit empty at {n_skipped} of {len(target)} target points"
        )
    resid = Sample(
        u=target.u[ok],
        x=target.x[ok],
        y=target.y[ok] - fit.values[ok],
        domain_label=Domain.TARGET,
    )
    return resid, n_skipped


def fit_transfer(
    target: Sample,
    source: Sample,
    spec: KernelSpec,
    h1: Bandwidth,
    h_tl: Bandwidth,
    method: Method,
) -> TransferFit:
    """Source fit with ``h1``, bias fit on target residuals with ``h_tl``."""
    if target.domain_label is not Domain.TARGET or source.domain_label is not Domain.SOURCE:
        raise ValidationError("fit_transfer expects (target, source) labeled samples")
    source_fit = KernelFit(source, spec, h1, method)
    resid, n_skipped = residual_sample(target, source_fit)
    bias_fit = KernelFit(resid, spec, h_tl, method)
    return TransferFit(
        source_fit=source_fit,
        bias_fit=bias_fit,
        method=method,
        n_residual_skipped=n_skipped,
    )


def _component(fit: KernelFit, label: str, u: float, x) -> float:
    try:
        return fit.predict(u, x)
    except EmptyWindowError as exc:
        raise EmptyWindowError(f"{label} window empty at ({u}, {x})", component=label) from exc


def tl_predict(fit: TransferFit, query) -> float:
    """Source prediction plus bias prediction at ``query``."""
    u, x = query
    return _component(fit.source_fit, "source", u, x) + _component(fit.bias_fit, "bias", u, x)


def tl_predict_full(fit: TransferFit, query) -> LocalFit:
    """Value and scaled gradient of the combined local linear fit.

    The source gradient is rescaled from h1 scaling to h_tl scaling
    axis by axis before being added to the bias gradient, so the result
    is expressed uniformly in h_tl units.
    """
    if fit.method is not Method.LL:
        raise ValidationError("full transfer fits are only defined for the ll method")
    u, x = query
    try:
        src = fit.source_fit.local_fit(u, x)
    except EmptyWindowError as exc:
        raise EmptyWindowError(f"source window empty at ({u}, {x})", component="source") from exc
    try:
        bias = fit.bias_fit.local_fit(u, x)
    except EmptyWindowError as exc:
        raise EmptyWindowError(f"bias window empty at ({u}, {x})", component="bias") from exc
    h1, h_tl = fit.source_fit.bw, fit.bias_fit.bw
    rescale = np.array(
        [h_tl.h_time / h1.h_time]
        + [h_tl.h_cov[j] / h1.h_cov[j] for j in range(h_tl.dim)]
    )
    return LocalFit(
        value=src.value + bias.value,
        scaled_gradient=bias.scaled_gradient + src.scaled_gradient * rescale,
        diag=bias.diag,
    )


def tl_surface(fit: TransferFit, grid: GridSpec) -> Surface:
    """Transfer predictions on a grid; missing where either part is."""
    src = fit.source_fit.surface(grid)
    bias = fit.bias_fit.surface(grid)
    return Surface(
        axes=src.axes,
        values=src.values + bias.values,
        missing=src.missing | bias.missing,
    )


def tl_predict_batch(fit: TransferFit, u_q, x_q) -> tuple[np.ndarray, np.ndarray]:
    """Vector of transfer predictions plus an availability mask."""
    src = fit.source_fit.predict_batch(u_q, x_q)
    bias = fit.bias_fit.predict_batch(u_q, x_q)
    ok = src.ok & bias.ok
    return np.where(ok, src.values + bias.values, np.nan), ok


def standardize_to(y_source, y_target) -> np.ndarray:
    """Affine map of ``y_source`` onto the population moments of ``y_target``."""
    mu_t, sd_t = float(np.mean(y_target)), float(np.std(y_target))
    mu_s, sd_s = float(np.mean(y_source)), float(np.std(y_source))
    if sd_t == 0.0 or sd_s == 0.0:
        raise DegenerateInputError("standardization needs nonzero variance")
    return (np.asarray(y_source) - mu_s) / sd_s * sd_t + mu_t


def pooled_union(target_train: Sample, source: Sample) -> Sample:
    """Union of the target training sample and the standardized source.

    Source responses are affinely mapped to the target-train population
    mean and variance; source rows whose rescaled time exactly ties a
    target training time are dropped; the union is ordered by time.
    """
    y_std = standardize_to(source.y, target_train.y)
    keep = ~np.isin(source.u, target_train.u)
    u = np.concatenate([target_train.u, source.u[keep]])
    x = np.vstack([target_train.x, source.x[keep]])
    y = np.concatenate([target_train.y, y_std[keep]])
    order = np.argsort(u, kind="stable")
    return Sample(u=u[order], x=x[order], y=y[order], domain_label=Domain.TARGET)


def fit_pooled(
    target_train: Sample,
    source: Sample,
    spec: KernelSpec,
    bw: Bandwidth,
    method: Method,
) -> KernelFit:
    """Fit the pooled union sample with the given method and bandwidth."""
    return KernelFit(pooled_union(target_train, source), spec, bw, method)


@dataclass(frozen=True)
class OracleRate:
    """Asymptotic bandwidth and risk orders for the transfer estimator."""

    case: int
    h_order: float
    rate_order: float
    h_exponent: float
    rate_exponent: float


def oracle_rate(t0: int, d: int, r: float, eta2: float) -> OracleRate:
    """Classify the rate regime and evaluate its bandwidth/rate orders.

    The regime depends on how the stationary-approximation exponent
    ``r`` compares with (d+1)/(d+5) and on whether the curvature bound
    ``eta2`` exceeds the sample-size-dependent cutoff separating the
    remainder-dominated balance from the variance-bias balance. Pure
    arithmetic: constants are dropped, no data involved.
    """
    if t0 < 2 or d < 1:
        raise ValidationError("need a sample size of at least 2 and dimension of at least 1")
    if not 0.0 < r <= 1.0:
        raise ValidationError(f"r must lie in (0, 1], got {r}")
    if not 0.0 < eta2 <= 1.0:
        raise ValidationError(f"eta2 must lie in (0, 1], got {eta2}")
    log_t = math.log(t0)

    if r >= (d + 1) / (d + 5):
        case = 1
    else:
        cutoff = math.sqrt(log_t) * t0 ** ((r * (d + 5) - (d + 1)) / (2 * (d + 1)))
        case = 2 if eta2 > cutoff else 3

    if case == 2:
        h_exp = -r / (d + 2)
        rate_exp = -2 * r / (d + 2)
        h_order = eta2 ** (1 / (d + 2)) * t0**h_exp
        rate_order = eta2 * t0**rate_exp
    else:
        h_exp = -1 / (d + 5)
        rate_exp = -2 / (d + 5)
        h_order = eta2 ** (-2 / (d + 5)) * log_t ** (1 / (d + 5)) * t0**h_exp
        rate_order = eta2 ** ((d + 1) / (d + 5)) * log_t ** (2 / (d + 5)) * t0**rate_exp
    return OracleRate(
        case=case,
        h_order=h_order,
        rate_order=rate_order,
        h_exponent=h_exp,
        rate_exponent=rate_exp,
    )
