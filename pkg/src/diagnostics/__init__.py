"""Diagnostics package: PAC-Bayes quantities, perturbation distortion and sharpness."""

from .distortion import (
    DegenerateInputError,
    DistortionReport,
    GradientSplit,
    distortion_report,
    empirical_gradient_split,
    parameter_deviation,
)
from .pac_bayes import GaussianPacConfig, gaussian_kl, pac_penalty, squared_norm
from .sharpness import sharpness_estimate

__all__ = [
    "DegenerateInputError",
    "DistortionReport",
    "GaussianPacConfig",
    "GradientSplit",
    "distortion_report",
    "empirical_gradient_split",
    "gaussian_kl",
    "pac_penalty",
    "parameter_deviation",
    "sharpness_estimate",
    "squared_norm",
]
