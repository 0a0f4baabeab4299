"""Fast separable Gaussian-process denoising and unsupervised cell segmentation."""

from gpcellseg.kernels import KernelFamily, KernelSpec, correlation_matrix, kernel_eval
from gpcellseg.fast_gp import (
    AxisEigen,
    GpHyperParams,
    PredictiveField,
    fit_mle,
    predict,
    profile_loglik_direct,
    profile_loglik_fast,
)

__all__ = [
    "KernelFamily",
    "KernelSpec",
    "kernel_eval",
    "correlation_matrix",
    "AxisEigen",
    "GpHyperParams",
    "PredictiveField",
    "profile_loglik_fast",
    "profile_loglik_direct",
    "fit_mle",
    "predict",
]
__version__ = "0.1.0"
