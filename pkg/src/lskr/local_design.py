"""Local weighted least-squares systems at a single query point.

Each observation contributes a regressor row (1, scaled time offset,
scaled covariate offsets) and a product-kernel weight; the normal
equations are accumulated as a (d+2) x (d+2) Gram matrix and moment
vector, both divided by the sample length. Solving them yields the
surface value and the bandwidth-scaled first derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import EmptyInputError, EmptyWindowError, NumericError, ShapeError, ValidationError
from .kernels import Bandwidth, KernelSpec, _epanechnikov

if TYPE_CHECKING:  # pragma: no cover
    from .estimators import Sample

MASS_FLOOR = 1e-12
RIDGE_REL = 1e-10


@dataclass(frozen=True)
class SolveDiagnostics:
    """Conditioning record of one local solve."""

    lambda_min_estimate: float
    ridge_applied: bool
    ridge_magnitude: float


@dataclass
class DesignSystem:
    """Accumulated normal equations of a local linear fit.

    ``gram`` is D'WD / T, ``moment`` is D'Wr / T, ``total_mass`` the sum
    of kernel weights / T and ``n_active`` the count of observations
    with positive weight.
    """

    gram: np.ndarray
    moment: np.ndarray
    total_mass: float
    n_active: int


def _weights(sample_u, sample_x, spec: KernelSpec, bw: Bandwidth, u: float, x: np.ndarray):
    """Product-kernel weights of every observation at the query point."""
    w = _epanechnikov((sample_u - u) / bw.h_time) / bw.h_time
    for j in range(bw.dim):
        w = w * (_epanechnikov((sample_x[:, j] - x[j]) / bw.h_cov[j]) / bw.h_cov[j])
    return w


def assemble(sample: "Sample", spec: KernelSpec, bw: Bandwidth, query, responses) -> DesignSystem:
    """Build the local design system for ``responses`` at ``query``.

    Row t carries (1, (u_t - u)/h_time, (x_t1 - x1)/h_cov1, ...) with its
    product-kernel weight; sums are normalized by the sample length.
    """
    u, x = query
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    r = np.asarray(responses, dtype=np.float64)
    n = len(sample.u)
    if n == 0:
        raise EmptyInputError("cannot assemble a design from an empty sample")
    if r.shape != (n,):
        raise ShapeError(f"responses shape {r.shape} does not match sample length {n}")
    if x.shape != (bw.dim,) or sample.x.shape[1] != bw.dim:
        raise ShapeError("query/covariate dimension does not match the bandwidth")
    if not 0.0 <= u <= 1.0:
        raise ValidationError(f"query time {u} outside [0, 1]")

    w = _weights(sample.u, sample.x, spec, bw, u, x)
    offs = np.empty((n, bw.dim + 2))
    offs[:, 0] = 1.0
    offs[:, 1] = (sample.u - u) / bw.h_time
    for j in range(bw.dim):
        offs[:, j + 2] = (sample.x[:, j] - x[j]) / bw.h_cov[j]
    ow = offs * w[:, None]
    gram = ow.T @ offs / n
    moment = ow.T @ r / n
    return DesignSystem(
        gram=gram,
        moment=moment,
        total_mass=float(w.sum()) / n,
        n_active=int((w > 0.0).sum()),
    )


def solve_systems(grams: np.ndarray, moments: np.ndarray, ridge_rel: float):
    """Solve a stack of local systems with the shared ridge-rescue rule.

    When the smallest eigenvalue of a Gram matrix falls below
    ``ridge_rel`` times its trace, that multiple of the identity is
    added before solving; the rescue is reported, never silent.

    Returns (coefficients, lambda_min, ridge_applied, ridge_magnitude),
    each stacked along the first axis.
    """
    if not np.all(np.isfinite(grams)) or not np.all(np.isfinite(moments)):
        raise NumericError("non-finite entries in local design system")
    lam_min = np.linalg.eigvalsh(grams)[..., 0]
    trace = np.trace(grams, axis1=-2, axis2=-1)
    need = lam_min < ridge_rel * trace
    ridge = np.where(need, ridge_rel * trace, 0.0)
    if need.any():
        grams = grams + ridge[..., None, None] * np.eye(grams.shape[-1])
    try:
        coef = np.linalg.solve(grams, moments[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"local system is singular: {exc}") from exc
    return coef, lam_min, need, ridge


def solve(
    system: DesignSystem,
    mass_floor: float = MASS_FLOOR,
    ridge_rel: float = RIDGE_REL,
) -> tuple[np.ndarray, SolveDiagnostics]:
    """Coefficients of the local weighted least-squares problem.

    Entry 0 is the surface value, the rest are the bandwidth-scaled
    first derivatives. An effectively weightless window is an error, not
    a NaN, so callers can distinguish "no data" from "bad fit".
    """
    if system.total_mass < mass_floor:
        raise EmptyWindowError(
            f"total kernel mass {system.total_mass:.3e} below floor {mass_floor:.3e}"
        )
    coef, lam, need, ridge = solve_systems(
        system.gram[None], system.moment[None], ridge_rel
    )
    if not np.all(np.isfinite(coef)):
        raise NumericError("local solve produced non-finite coefficients")
    diag = SolveDiagnostics(
        lambda_min_estimate=float(lam[0]),
        ridge_applied=bool(need[0]),
        ridge_magnitude=float(ridge[0]),
    )
    return coef[0], diag


def min_eigenvalue(system: DesignSystem) -> float:
    """Smallest eigenvalue of the Gram matrix (conditioning diagnostic)."""
    if not np.all(np.isfinite(system.gram)):
        raise NumericError("non-finite entries in Gram matrix")
    return float(np.linalg.eigvalsh(system.gram)[0])
