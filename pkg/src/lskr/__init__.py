"""Kernel regression and bias-corrected transfer learning for locally
stationary time series."""

__version__ = "0.1.0"

from .bandwidth import CvPlan, CvResult, cv_select, default_grid
from .datagen import (
    BiasFamily,
    SimConfig,
    StreamRng,
    Tvar2Spec,
    bias_eval,
    generate_pair,
    run_sweep,
    target_surface,
)
from .estimators import (
    Domain,
    KernelFit,
    LocalFit,
    Method,
    Sample,
    fit_surface,
    ll_fit,
    nw_predict,
)
from .kernels import Bandwidth, KernelSpec, kernel_eval, product_weight, scaled_kernel
from .metrics import (
    ErrorReport,
    GridSpec,
    Surface,
    bilinear_interp,
    grid_median_error,
    rate_slope,
    test_losses,
)
from .transfer import (
    BiasSmoothness,
    OracleRate,
    TransferFit,
    fit_pooled,
    fit_transfer,
    oracle_rate,
    tl_predict,
    tl_predict_full,
)

__all__ = [
    "Bandwidth",
    "BiasFamily",
    "BiasSmoothness",
    "CvPlan",
    "CvResult",
    "Domain",
    "ErrorReport",
    "GridSpec",
    "KernelFit",
    "KernelSpec",
    "LocalFit",
    "Method",
    "OracleRate",
    "Sample",
    "SimConfig",
    "StreamRng",
    "Surface",
    "TransferFit",
    "Tvar2Spec",
    "bias_eval",
    "bilinear_interp",
    "cv_select",
    "default_grid",
    "fit_pooled",
    "fit_surface",
    "fit_transfer",
    "generate_pair",
    "grid_median_error",
    "kernel_eval",
    "ll_fit",
    "nw_predict",
    "oracle_rate",
    "product_weight",
    "rate_slope",
    "run_sweep",
    "scaled_kernel",
    "target_surface",
    "test_losses",
    "tl_predict",
    "tl_predict_full",
]
