"""Two-step sharpness-aware minimization."""

from typing import Optional

from model.mlp import Batch, GradientSet, LossFn, ParameterSet
from .base_optimizer import BaseOptimizer, OptimizerConfig, OptimizerState
from .sgd import sgd_step

ZERO_GRAD_TOL = 1e-12


def sam_perturbation(grad: GradientSet, rho: float) -> GradientSet:
    """rho * g / ||g||, or zeros when ||g|| <= 1e-12."""
    if rho < 0:
        raise ValueError(f"SAM radius must be >= 0, got {rho}")
    norm = grad.l2_norm()
    if rho == 0.0 or norm <= ZERO_GRAD_TOL:
        return grad.zeros_like().as_gradient()
    return grad.scale(rho / norm).as_gradient()


def sam_step(
    loss_fn: LossFn,
    params: ParameterSet,
    batch: Batch,
    state: OptimizerState,
    config: OptimizerConfig,
    learning_rate: Optional[float] = None,
) -> ParameterSet:
    """Ascend to params + eps, then descend from params with the gradient found there."""
    loss, first_grad = loss_fn(params, batch)
    perturbation = sam_perturbation(first_grad, config.sam_radius)
    _, second_grad = loss_fn(params.axpy(1.0, perturbation).as_parameters(), batch)

    state.last_loss = loss
    state.last_perturbation = perturbation
    state.last_correction = None
    return sgd_step(params, second_grad, state, config, learning_rate)


class SAMOptimizer(BaseOptimizer):
    """Sharpness-aware minimization with momentum/decay applied to the second gradient."""

    name = "sam"

    def step(self, params: ParameterSet, batch: Batch, plan=None) -> ParameterSet:
        return sam_step(self.loss_fn, params, batch, self.state, self.config, self.learning_rate)
