"""Tail-averaged SGD versus ridge regression on least-squares instances."""

from .estimators import (
    RidgeConfig,
    RidgeMode,
    RiskEstimate,
    SgdConfig,
    SingularMatrixError,
    draw_sample,
    draw_samples,
    excess_risk,
    mc_risk,
    ridge_fit,
    sgd_fit,
)
from .instances import Kind, ProblemInstance, is_generalizable, load_instance, r_squared, save_instance
from .spectra import Spectrum, power_law_spectrum

__all__ = [
    "Kind", "ProblemInstance", "RidgeConfig", "RidgeMode", "RiskEstimate", "SgdConfig",
    "SingularMatrixError", "Spectrum", "draw_sample", "draw_samples", "excess_risk",
    "is_generalizable", "load_instance", "mc_risk", "power_law_spectrum", "r_squared",
    "ridge_fit", "save_instance", "sgd_fit",
]
