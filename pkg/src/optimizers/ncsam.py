"""Noise-compensated SAM.

The SAM ascent direction is shifted by a correction built from the gradient
of a temporarily label-flipped subset of the batch:

    dW_c = -s(t) * g_n
    eps' = eps - dW_c

Both terms are cached on the optimizer state for the per-epoch diagnostics.
"""

from typing import Optional
import logging

from model.mlp import Batch, GradientSet, LossFn, ParameterSet
from noise.flip_simulator import FlipPlan, simulated_noise_gradient
from .base_optimizer import BaseOptimizer, OptimizerConfig, OptimizerState
from .sam import ZERO_GRAD_TOL, sam_perturbation
from .schedule import scale_for_mode
from .sgd import sgd_step

logger = logging.getLogger(__name__)


def compensation_term(noise_grad: GradientSet, scale: float, normalize: bool = False) -> GradientSet:
    """-s * g_n (or -s * g_n / ||g_n|| when normalized)."""
    if scale < 0:
        raise ValueError(f"Compensation scale must be >= 0, got {scale}")
    norm = noise_grad.l2_norm()
    if scale == 0.0 or norm <= ZERO_GRAD_TOL:
        return noise_grad.zeros_like().as_gradient()
    factor = scale / norm if normalize else scale
    return noise_grad.scale(-factor).as_gradient()


def ncsam_step(
    loss_fn: LossFn,
    params: ParameterSet,
    batch: Batch,
    plan: Optional[FlipPlan],
    state: OptimizerState,
    config: OptimizerConfig,
    learning_rate: Optional[float] = None,
) -> ParameterSet:
    """One NCSAM update using the schedule scale already stored in `state`."""
    scale = state.schedule.scale
    loss, first_grad = loss_fn(params, batch)
    perturbation = sam_perturbation(first_grad, config.sam_radius)

    correction = perturbation.zeros_like().as_gradient()
    if scale > 0.0:
        if plan is None or plan.is_empty:
            logger.warning(
                f"Empty flip plan at epoch {state.schedule.epoch} with s(t)={scale:.4g}; "
                "correction skipped"
            )
        else:
            noise_grad = simulated_noise_gradient(params, batch, plan, loss_fn)
            correction = compensation_term(noise_grad, scale, config.normalize_noise_grad)

    adjusted = perturbation.axpy(-float(config.correction_sign), correction)
    _, second_grad = loss_fn(params.axpy(1.0, adjusted).as_parameters(), batch)

    state.last_loss = loss
    state.last_perturbation = perturbation
    state.last_correction = correction
    return sgd_step(params, second_grad, state, config, learning_rate)


class NCSAMOptimizer(BaseOptimizer):
    """NCSAM driven by per-batch flip plans and the epoch-level schedule s(t)."""

    name = "ncsam"

    def begin_epoch(self, epoch: int):
        super().begin_epoch(epoch)
        self.state.schedule.scale = scale_for_mode(
            self.config.schedule_mode,
            epoch,
            self.config.warmup_epochs,
            self.config.ramp_epochs,
            self.config.kappa,
        )

    def step(self, params: ParameterSet, batch: Batch, plan: Optional[FlipPlan] = None) -> ParameterSet:
        return ncsam_step(
            self.loss_fn, params, batch, plan, self.state, self.config, self.learning_rate
        )
