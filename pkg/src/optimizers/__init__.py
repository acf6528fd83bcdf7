"""Optimizers package: SGD, SAM and noise-compensated SAM."""

from model.mlp import LossFn, loss_and_grad

from .base_optimizer import (
    OPTIMIZER_NAMES,
    SCHEDULE_MODES,
    BaseOptimizer,
    OptimizerConfig,
    OptimizerState,
    ScheduleState,
)
from .ncsam import NCSAMOptimizer, compensation_term, ncsam_step
from .sam import SAMOptimizer, sam_perturbation, sam_step
from .schedule import scale_for_mode, schedule_scale, smoothstep_raw
from .sgd import SGDOptimizer, sgd_step

_REGISTRY = {
    SGDOptimizer.name: SGDOptimizer,
    SAMOptimizer.name: SAMOptimizer,
    NCSAMOptimizer.name: NCSAMOptimizer,
}


def build_optimizer(name: str, config: OptimizerConfig, loss_fn: LossFn = loss_and_grad) -> BaseOptimizer:
    """Instantiate an optimizer by its registry name."""
    try:
        optimizer_cls = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"Unknown optimizer '{name}', expected one of {OPTIMIZER_NAMES}") from None
    return optimizer_cls(config, loss_fn)


__all__ = [
    "OPTIMIZER_NAMES",
    "SCHEDULE_MODES",
    "BaseOptimizer",
    "NCSAMOptimizer",
    "OptimizerConfig",
    "OptimizerState",
    "SAMOptimizer",
    "SGDOptimizer",
    "ScheduleState",
    "build_optimizer",
    "compensation_term",
    "ncsam_step",
    "sam_perturbation",
    "sam_step",
    "scale_for_mode",
    "schedule_scale",
    "sgd_step",
    "smoothstep_raw",
]
