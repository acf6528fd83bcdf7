"""Momentum SGD with coupled weight decay."""

from typing import Optional

from model.mlp import Batch, GradientSet, ParameterSet
from .base_optimizer import BaseOptimizer, OptimizerConfig, OptimizerState


def sgd_step(
    params: ParameterSet,
    grad: GradientSet,
    state: OptimizerState,
    config: OptimizerConfig,
    learning_rate: Optional[float] = None,
) -> ParameterSet:
    """buffer <- momentum * buffer + (grad + wd * params); params' = params - lr * buffer."""
    params.check_congruent(grad)
    lr = config.learning_rate if learning_rate is None else learning_rate

    direction = grad.axpy(config.weight_decay, params) if config.weight_decay else grad
    buffer = state.buffers_for(params).scale(config.momentum).add(direction)
    state.momentum_buffers = buffer.as_gradient()
    state.step_count += 1
    return params.axpy(-lr, buffer).as_parameters()


class SGDOptimizer(BaseOptimizer):
    """Plain momentum SGD on the observed labels."""

    name = "sgd"

    def step(self, params: ParameterSet, batch: Batch, plan=None) -> ParameterSet:
        loss, grad = self.loss_fn(params, batch)
        self.state.last_loss = loss
        self.state.last_perturbation = None
        self.state.last_correction = None
        return sgd_step(params, grad, self.state, self.config, self.learning_rate)
