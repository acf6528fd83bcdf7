"""Model package."""

from .mlp import (
    Batch,
    GradientSet,
    MlpSpec,
    ParameterSet,
    ShapeMismatchError,
    accuracy,
    forward,
    grad_dot,
    grad_l2_norm,
    init_params,
    loss_and_grad,
    param_axpy,
    predict,
    predict_proba,
)

__all__ = [
    "Batch",
    "GradientSet",
    "MlpSpec",
    "ParameterSet",
    "ShapeMismatchError",
    "accuracy",
    "forward",
    "grad_dot",
    "grad_l2_norm",
    "init_params",
    "loss_and_grad",
    "param_axpy",
    "predict",
    "predict_proba",
]
