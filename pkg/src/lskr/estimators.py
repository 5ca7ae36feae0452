"""Single-domain kernel estimators on (rescaled time, covariates).

Two fitting methods share the same product-kernel weights: the local
average ("nw") and the local linear fit ("ll"), which solves the local
weighted least-squares problem and also returns bandwidth-scaled first
derivatives. Surface evaluation marks cells with an empty kernel window
as missing instead of failing, because downstream error metrics need to
distinguish "no data here" from "bad fit".
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import local_design
from ._engine import BatchFit, batch_predict
from .errors import EmptyInputError, EmptyWindowError, ShapeError, ValidationError
from .kernels import Bandwidth, KernelSpec
from .local_design import MASS_FLOOR, SolveDiagnostics
from .metrics import GridSpec, Surface


class Method(str, Enum):
    NW = "nw"
    LL = "ll"


class Domain(str, Enum):
    TARGET = "target"
    SOURCE = "source"


@dataclass(frozen=True)
class Sample:
    """Observations of one domain: rescaled times, covariates, responses.

    ``u`` must be nondecreasing in [0, 1]; ``x`` has one row per
    observation and one column per covariate axis. Arrays are stored
    read-only so fitted handles can share them safely.
    """

    u: np.ndarray
    x: np.ndarray
    y: np.ndarray
    domain_label: Domain = Domain.TARGET

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if u.ndim != 1 or y.ndim != 1 or x.ndim != 2:
            raise ShapeError("sample arrays must be (T,), (T, d), (T,)")
        if not (len(u) == len(y) == x.shape[0]):
            raise ShapeError(
                f"sample lengths disagree: u={len(u)}, x={x.shape[0]}, y={len(y)}"
            )
        if len(u) == 0:
            raise EmptyInputError("sample is empty")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValidationError("sample contains non-finite values")
        if u.min() < 0.0 or u.max() > 1.0:
            raise ValidationError("rescaled times must lie in [0, 1]")
        if np.any(np.diff(u) < 0.0):
            raise ValidationError("rescaled times must be nondecreasing")
        for name, arr in (("u", u), ("x", x), ("y", y)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.u)

    @property
    def dim(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class LocalFit:
    """Value and bandwidth-scaled gradient of one local linear fit."""

    value: float
    scaled_gradient: np.ndarray
    diag: SolveDiagnostics


def _check_query(sample: Sample, bw: Bandwidth, query):
    u, x = query
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if not np.isfinite(u) or not np.all(np.isfinite(x)):
        raise ValidationError("query must be finite")
    if not 0.0 <= u <= 1.0:
        raise ValidationError(f"query time {u} outside [0, 1]")
    if x.shape != (sample.dim,) or bw.dim != sample.dim:
        raise ShapeError(
            f"query dim {x.shape}, sample dim {sample.dim}, bandwidth dim {bw.dim} disagree"
        )
    return float(u), x


def nw_predict(
    sample: Sample,
    spec: KernelSpec,
    bw: Bandwidth,
    query,
    mass_floor: float = MASS_FLOOR,
) -> float:
    """Kernel-weighted local average of the responses at ``query``.

    Shares the batch engine so scalar and surface evaluations agree
    bitwise; the equivalent reference formula lives in local_design.
    """
    u, x = _check_query(sample, bw, query)
    out = batch_predict(
        sample.u, sample.x, sample.y,
        np.array([u]), x[None, :],
        spec, bw, "nw", mass_floor=mass_floor,
    )
    if not out.ok[0]:
        raise EmptyWindowError(f"no kernel mass at query ({u}, {x.tolist()})")
    return float(out.values[0])


def ll_fit(
    sample: Sample,
    spec: KernelSpec,
    bw: Bandwidth,
    query,
    mass_floor: float = MASS_FLOOR,
    ridge_rel: float = local_design.RIDGE_REL,
) -> LocalFit:
    """Local linear fit at ``query``: surface value plus scaled slopes.

    Semantically identical to solving the assembled local design system;
    the shared batch engine guarantees scalar and surface evaluations
    agree bitwise.
    """
    u, x = _check_query(sample, bw, query)
    out = batch_predict(
        sample.u, sample.x, sample.y,
        np.array([u]), x[None, :],
        spec, bw, "ll", mass_floor=mass_floor, ridge_rel=ridge_rel,
    )
    if not out.ok[0]:
        raise EmptyWindowError(
            f"total kernel mass {out.mass[0]:.3e} below floor {mass_floor:.3e}"
        )
    diag = SolveDiagnostics(
        lambda_min_estimate=float(out.lambda_min[0]),
        ridge_applied=bool(out.ridge_applied[0]),
        ridge_magnitude=float(out.ridge_magnitude[0]),
    )
    return LocalFit(value=float(out.values[0]), scaled_gradient=out.gradients[0], diag=diag)


@dataclass(frozen=True)
class KernelFit:
    """Frozen estimator handle: a sample, kernel, bandwidth and method."""

    sample: Sample
    spec: KernelSpec
    bw: Bandwidth
    method: Method

    def predict(self, u: float, x) -> float:
        if self.method is Method.NW:
            return nw_predict(self.sample, self.spec, self.bw, (u, x))
        return ll_fit(self.sample, self.spec, self.bw, (u, x)).value

    def local_fit(self, u: float, x) -> LocalFit:
        if self.method is not Method.LL:
            raise ValidationError("local_fit is only defined for the ll method")
        return ll_fit(self.sample, self.spec, self.bw, (u, x))

    def predict_batch(self, u_q, x_q) -> BatchFit:
        u_q = np.asarray(u_q, dtype=np.float64)
        x_q = np.asarray(x_q, dtype=np.float64)
        if x_q.ndim == 1:
            x_q = x_q[:, None]
        return batch_predict(
            self.sample.u,
            self.sample.x,
            self.sample.y,
            u_q,
            x_q,
            self.spec,
            self.bw,
            self.method.value,
        )

    def surface(self, grid: GridSpec) -> Surface:
        return fit_surface(self.sample, self.spec, self.bw, grid, self.method)


def fit_surface(
    sample: Sample,
    spec: KernelSpec,
    bw: Bandwidth,
    grid: GridSpec,
    method: Method,
) -> Surface:
    """Evaluate the estimator on every grid node.

    Nodes whose kernel window is empty become missing cells; a single
    empty cell never aborts the rest of the surface.
    """
    if grid.dim != sample.dim:
        raise ShapeError(f"grid dim {grid.dim} does not match sample dim {sample.dim}")
    axes = grid.axes()
    mesh = np.meshgrid(*axes, indexing="ij")
    u_q = mesh[0].ravel()
    x_q = np.column_stack([m.ravel() for m in mesh[1:]])
    fit = batch_predict(
        sample.u, sample.x, sample.y, u_q, x_q, spec, bw, method.value
    )
    shape = tuple(len(a) for a in axes)
    return Surface(
        axes=axes,
        values=fit.values.reshape(shape),
        missing=(~fit.ok).reshape(shape),
    )
