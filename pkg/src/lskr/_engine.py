"""Vectorized batch evaluation of the kernel estimators.

Samples keep u sorted, so each query only touches the contiguous slice
of observations whose rescaled time can fall inside the kernel support;
observations outside the support contribute exact zeros, so windowing
never changes results. The hot accumulation loops are compiled with
numba when it is available, with an equivalent numpy implementation as
fallback; the ridge rule and all formulas are shared with the scalar
reference path in local_design.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import Bandwidth, KernelSpec, _epanechnikov
from .local_design import MASS_FLOOR, RIDGE_REL, solve_systems

try:  # pragma: no cover - exercised indirectly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


# Target element count of one (chunk x window x regressor) block in the
# numpy fallback.
_CHUNK_BUDGET = 3_000_000


@dataclass
class BatchFit:
    """Batched estimator output; entries of failed queries are NaN."""

    values: np.ndarray
    ok: np.ndarray
    mass: np.ndarray
    gradients: np.ndarray | None = None
    lambda_min: np.ndarray | None = None
    ridge_applied: np.ndarray | None = None
    ridge_magnitude: np.ndarray | None = None


@njit(cache=True)
def _nw_accumulate(u_obs, x_obs, y_obs, u_q, x_q, h_t, h_x, radius):
    nq = u_q.shape[0]
    d = x_obs.shape[1]
    values = np.full(nq, np.nan)
    mass = np.zeros(nq)
    for i in range(nq):
        lo = np.searchsorted(u_obs, u_q[i] - radius * h_t, side="left")
        hi = np.searchsorted(u_obs, u_q[i] + radius * h_t, side="right")
        s = 0.0
        sy = 0.0
        y_lo = np.inf
        y_hi = -np.inf
        for t in range(lo, hi):
            dt = (u_obs[t] - u_q[i]) / h_t
            if dt < -1.0 or dt > 1.0:
                continue
            w = 0.75 * (1.0 - dt * dt) / h_t
            for j in range(d):
                dx = (x_obs[t, j] - x_q[i, j]) / h_x[j]
                if dx < -1.0 or dx > 1.0:
                    w = 0.0
                    break
                w *= 0.75 * (1.0 - dx * dx) / h_x[j]
            if w <= 0.0:
                continue
            s += w
            sy += w * y_obs[t]
            if y_obs[t] < y_lo:
                y_lo = y_obs[t]
            if y_obs[t] > y_hi:
                y_hi = y_obs[t]
        mass[i] = s
        if s > 0.0:
            v = sy / s
            # A weighted average lies in the active response range;
            # clamping only removes float round-off.
            if v < y_lo:
                v = y_lo
            if v > y_hi:
                v = y_hi
            values[i] = v
    return values, mass


@njit(cache=True)
def _ll_accumulate(u_obs, x_obs, y_obs, u_q, x_q, h_t, h_x, radius):
    nq = u_q.shape[0]
    d = x_obs.shape[1]
    k = d + 2
    grams = np.zeros((nq, k, k))
    moments = np.zeros((nq, k))
    mass = np.zeros(nq)
    row = np.empty(k)
    for i in range(nq):
        lo = np.searchsorted(u_obs, u_q[i] - radius * h_t, side="left")
        hi = np.searchsorted(u_obs, u_q[i] + radius * h_t, side="right")
        s = 0.0
        for t in range(lo, hi):
            dt = (u_obs[t] - u_q[i]) / h_t
            if dt < -1.0 or dt > 1.0:
                continue
            w = 0.75 * (1.0 - dt * dt) / h_t
            row[0] = 1.0
            row[1] = dt
            for j in range(d):
                dx = (x_obs[t, j] - x_q[i, j]) / h_x[j]
                if dx < -1.0 or dx > 1.0:
                    w = 0.0
                    break
                w *= 0.75 * (1.0 - dx * dx) / h_x[j]
                row[j + 2] = dx
            if w <= 0.0:
                continue
            s += w
            for a in range(k):
                wr = w * row[a]
                moments[i, a] += wr * y_obs[t]
                for b in range(a, k):
                    grams[i, a, b] += wr * row[b]
        mass[i] = s
        for a in range(1, k):
            for b in range(a):
                grams[i, a, b] = grams[i, b, a]
    return grams, moments, mass


def _weight_block(u_obs, x_obs, u_q, x_q, bw: Bandwidth):
    """(n_query, n_obs) product-kernel weights (numpy fallback)."""
    w = _epanechnikov((u_obs[None, :] - u_q[:, None]) / bw.h_time) / bw.h_time
    for j in range(bw.dim):
        w *= (
            _epanechnikov((x_obs[None, :, j] - x_q[:, None, j]) / bw.h_cov[j])
            / bw.h_cov[j]
        )
    return w


def _numpy_nw(u_obs, x_obs, y_obs, u_q, x_q, bw, radius):
    nq, T = len(u_q), len(u_obs)
    values = np.full(nq, np.nan)
    mass = np.zeros(nq)
    chunk = max(8, min(nq, _CHUNK_BUDGET // max(1, T)))
    for start in range(0, nq, chunk):
        sl = slice(start, min(start + chunk, nq))
        uq, xq = u_q[sl], x_q[sl]
        lo = int(np.searchsorted(u_obs, uq.min() - radius * bw.h_time, side="left"))
        hi = int(np.searchsorted(u_obs, uq.max() + radius * bw.h_time, side="right"))
        if hi <= lo:
            continue
        uw, xw, yw = u_obs[lo:hi], x_obs[lo:hi], y_obs[lo:hi]
        w = _weight_block(uw, xw, uq, xq, bw)
        s = w.sum(axis=1)
        mass[sl] = s
        good = s > 0.0
        if good.any():
            active = w[good] > 0.0
            lo_y = np.where(active, yw[None, :], np.inf).min(axis=1)
            hi_y = np.where(active, yw[None, :], -np.inf).max(axis=1)
            vals = np.full(len(uq), np.nan)
            vals[good] = np.clip((w[good] @ yw) / s[good], lo_y, hi_y)
            values[sl] = vals
    return values, mass


def _numpy_ll(u_obs, x_obs, y_obs, u_q, x_q, bw, radius):
    nq, T = len(u_q), len(u_obs)
    d = x_obs.shape[1]
    k = d + 2
    grams = np.zeros((nq, k, k))
    moments = np.zeros((nq, k))
    mass = np.zeros(nq)
    chunk = max(8, min(nq, _CHUNK_BUDGET // max(1, T * k)))
    for start in range(0, nq, chunk):
        sl = slice(start, min(start + chunk, nq))
        uq, xq = u_q[sl], x_q[sl]
        lo = int(np.searchsorted(u_obs, uq.min() - radius * bw.h_time, side="left"))
        hi = int(np.searchsorted(u_obs, uq.max() + radius * bw.h_time, side="right"))
        if hi <= lo:
            continue
        uw, xw, yw = u_obs[lo:hi], x_obs[lo:hi], y_obs[lo:hi]
        w = _weight_block(uw, xw, uq, xq, bw)
        mass[sl] = w.sum(axis=1)
        offs = np.empty((len(uq), hi - lo, k))
        offs[:, :, 0] = 1.0
        offs[:, :, 1] = (uw[None, :] - uq[:, None]) / bw.h_time
        for j in range(d):
            offs[:, :, j + 2] = (xw[None, :, j] - xq[:, None, j]) / bw.h_cov[j]
        ow = offs * w[:, :, None]
        grams[sl] = np.matmul(ow.transpose(0, 2, 1), offs)
        moments[sl] = np.matmul(ow.transpose(0, 2, 1), yw[:, None])[..., 0]
    return grams, moments, mass


def batch_predict(
    u_obs: np.ndarray,
    x_obs: np.ndarray,
    y_obs: np.ndarray,
    u_q: np.ndarray,
    x_q: np.ndarray,
    spec: KernelSpec,
    bw: Bandwidth,
    method: str,
    mass_floor: float = MASS_FLOOR,
    ridge_rel: float = RIDGE_REL,
    use_numba: bool | None = None,
) -> BatchFit:
    """Evaluate ``method`` ("nw" or "ll") at every query point.

    The empty-window convention matches the scalar paths: the local
    average fails when the raw weight sum is below ``mass_floor``, the
    local linear fit when the sum divided by the sample length is.
    """
    u_obs = np.ascontiguousarray(u_obs, dtype=np.float64)
    x_obs = np.ascontiguousarray(x_obs, dtype=np.float64)
    y_obs = np.ascontiguousarray(y_obs, dtype=np.float64)
    u_q = np.ascontiguousarray(u_q, dtype=np.float64)
    x_q = np.ascontiguousarray(x_q, dtype=np.float64)
    h_x = np.asarray(bw.h_cov, dtype=np.float64)
    radius = float(spec.support_radius)
    fast = HAVE_NUMBA if use_numba is None else (use_numba and HAVE_NUMBA)

    if method == "nw":
        if fast:
            values, mass = _nw_accumulate(
                u_obs, x_obs, y_obs, u_q, x_q, bw.h_time, h_x, radius
            )
        else:
            values, mass = _numpy_nw(u_obs, x_obs, y_obs, u_q, x_q, bw, radius)
        ok = (mass >= mass_floor) & np.isfinite(values)
        return BatchFit(values=np.where(ok, values, np.nan), ok=ok, mass=mass)

    if method != "ll":
        raise ValueError(f"unknown method {method!r}")
    T = len(u_obs)
    if fast:
        grams, moments, mass = _ll_accumulate(
            u_obs, x_obs, y_obs, u_q, x_q, bw.h_time, h_x, radius
        )
    else:
        grams, moments, mass = _numpy_ll(u_obs, x_obs, y_obs, u_q, x_q, bw, radius)
    grams /= T
    moments /= T
    mass = mass / T

    nq, d = len(u_q), x_obs.shape[1]
    values = np.full(nq, np.nan)
    grads = np.full((nq, d + 1), np.nan)
    lam = np.full(nq, np.nan)
    ridged = np.zeros(nq, dtype=bool)
    ridge_mag = np.zeros(nq)
    good = mass >= mass_floor
    if good.any():
        coef, lmin, need, rmag = solve_systems(grams[good], moments[good], ridge_rel)
        values[good] = coef[:, 0]
        grads[good] = coef[:, 1:]
        lam[good] = lmin
        ridged[good] = need
        ridge_mag[good] = rmag
    ok = good & np.isfinite(values)
    return BatchFit(
        values=np.where(ok, values, np.nan),
        ok=ok,
        mass=mass,
        gradients=grads,
        lambda_min=lam,
        ridge_applied=ridged,
        ridge_magnitude=ridge_mag,
    )
