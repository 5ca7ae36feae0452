"""Compactly supported smoothing kernels and per-axis bandwidths.

All estimators weight observations with a product kernel: one scaled
one-dimensional kernel on the rescaled-time axis times one per covariate
axis. Only the Epanechnikov kernel ships; anything added must stay
symmetric, bounded, nonnegative and compactly supported, and integrate
to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidBandwidthError, ShapeError, ValidationError

EPANECHNIKOV = "epanechnikov"


@dataclass(frozen=True)
class KernelSpec:
    """A one-dimensional kernel family plus its support half-width."""

    family: str = EPANECHNIKOV
    support_radius: float = 1.0

    def __post_init__(self):
        if self.family != EPANECHNIKOV:
            raise ValidationError(f"unknown kernel family: {self.family!r}")
        # The Epanechnikov form 3/4 (1 - v^2) integrates to one exactly on
        # [-1, 1]; other radii would need a rescaled formula.
        if self.support_radius != 1.0:
            raise ValidationError(
                "epanechnikov kernel is defined with support_radius 1.0"
            )


@dataclass(frozen=True)
class Bandwidth:
    """Smoothing half-widths: one for rescaled time, one per covariate axis."""

    h_time: float
    h_cov: tuple[float, ...]

    def __post_init__(self):
        if isinstance(self.h_cov, (int, float)):
            object.__setattr__(self, "h_cov", (float(self.h_cov),))
        else:
            object.__setattr__(self, "h_cov", tuple(float(h) for h in self.h_cov))
        object.__setattr__(self, "h_time", float(self.h_time))
        for h in (self.h_time, *self.h_cov):
            if not (math.isfinite(h) and h > 0.0):
                raise InvalidBandwidthError(f"bandwidth entries must be positive and finite, got {h!r}")

    @property
    def dim(self) -> int:
        return len(self.h_cov)


def _epanechnikov(v: np.ndarray) -> np.ndarray:
    """Vectorized 3/4 (1 - v^2) on |v| <= 1, zero outside."""
    v = np.asarray(v, dtype=np.float64)
    return np.where(np.abs(v) <= 1.0, 0.75 * (1.0 - v * v), 0.0)


def kernel_eval(spec: KernelSpec, v: float) -> float:
    """Evaluate the kernel at ``v``.

    Returns 3/4 (1 - v^2) inside the support and exactly zero outside.
    """
    if not math.isfinite(v):
        raise ValidationError(f"kernel argument must be finite, got {v!r}")
    if abs(v) > spec.support_radius:
        return 0.0
    return 0.75 * (1.0 - v * v)


def scaled_kernel(spec: KernelSpec, h: float, v: float) -> float:
    """Evaluate the bandwidth-scaled kernel K(v / h) / h."""
    if not (math.isfinite(h) and h > 0.0):
        raise InvalidBandwidthError(f"bandwidth must be positive and finite, got {h!r}")
    return kernel_eval(spec, v / h) / h


def product_weight(
    spec: KernelSpec,
    bw: Bandwidth,
    u_query: float,
    u_obs: float,
    x_query,
    x_obs,
) -> float:
    """Product of the scaled time kernel and the scaled covariate kernels.

    Zero as soon as any axis falls outside the kernel support. An empty
    covariate vector degenerates to the time factor alone.
    """
    x_query = np.atleast_1d(np.asarray(x_query, dtype=np.float64))
    x_obs = np.atleast_1d(np.asarray(x_obs, dtype=np.float64))
    if x_query.shape != x_obs.shape or x_query.shape != (bw.dim,):
        raise ShapeError(
            f"covariate shapes {x_query.shape} / {x_obs.shape} do not match bandwidth dim {bw.dim}"
        )
    w = scaled_kernel(spec, bw.h_time, u_obs - u_query)
    for j in range(bw.dim):
        if w == 0.0:
            return 0.0
        w *= scaled_kernel(spec, bw.h_cov[j], x_obs[j] - x_query[j])
    return w
