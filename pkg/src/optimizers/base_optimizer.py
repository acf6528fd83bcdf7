"""Base optimizer class and the configuration/state shared by all optimizers."""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from model.mlp import Batch, GradientSet, LossFn, ParameterSet, loss_and_grad

OPTIMIZER_NAMES = ("sgd", "sam", "ncsam")
SCHEDULE_MODES = ("progressive", "constant_scale")


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 1e-3
    sam_radius: float = 0.05
    kappa: float = 0.1
    warmup_epochs: int = 0
    ramp_epochs: int = 1
    flip_ratio: float = 0.4
    warmup_optimizer: str = "sgd"
    normalize_noise_grad: bool = False
    correction_sign: int = 1
    schedule_mode: str = "progressive"

    def __post_init__(self):
        issues = []
        if not self.learning_rate > 0:
            issues.append(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            issues.append(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            issues.append(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.sam_radius < 0:
            issues.append(f"sam_radius must be >= 0, got {self.sam_radius}")
        if self.kappa < 0:
            issues.append(f"kappa must be >= 0, got {self.kappa}")
        if self.warmup_epochs < 0:
            issues.append(f"warmup_epochs must be >= 0, got {self.warmup_epochs}")
        if self.ramp_epochs < 1:
            issues.append(f"ramp_epochs must be >= 1, got {self.ramp_epochs}")
        if not 0.0 < self.flip_ratio <= 1.0:
            issues.append(f"flip_ratio must lie in (0, 1], got {self.flip_ratio}")
        if self.warmup_optimizer not in ("sgd", "sam"):
            issues.append(f"warmup_optimizer must be 'sgd' or 'sam', got {self.warmup_optimizer}")
        if self.correction_sign not in (1, -1):
            issues.append(f"correction_sign must be +1 or -1, got {self.correction_sign}")
        if self.schedule_mode not in SCHEDULE_MODES:
            issues.append(f"schedule_mode must be one of {SCHEDULE_MODES}, got {self.schedule_mode}")
        if issues:
            raise ValueError("Invalid optimizer config: " + "; ".join(issues))


@dataclass
class ScheduleState:
    epoch: int = 0
    scale: float = 0.0


@dataclass
class OptimizerState:
    """Mutable per-optimizer state; the perturbation fields are diagnostics only."""

    momentum_buffers: Optional[GradientSet] = None
    schedule: ScheduleState = field(default_factory=ScheduleState)
    last_perturbation: Optional[GradientSet] = None
    last_correction: Optional[GradientSet] = None
    last_loss: Optional[float] = None
    step_count: int = 0

    def buffers_for(self, params: ParameterSet) -> GradientSet:
        if self.momentum_buffers is None:
            self.momentum_buffers = params.zeros_like().as_gradient()
        else:
            params.check_congruent(self.momentum_buffers)
        return self.momentum_buffers

    @property
    def perturbation_norm(self) -> float:
        return 0.0 if self.last_perturbation is None else self.last_perturbation.l2_norm()

    @property
    def correction_norm(self) -> float:
        return 0.0 if self.last_correction is None else self.last_correction.l2_norm()


class BaseOptimizer(ABC):
    """Base class for all optimizers in the toolkit.

    An instance owns its state and is single-writer: `step` calls must be
    sequential. Distinct instances share nothing.
    """

    name = "base"

    def __init__(self, config: OptimizerConfig, loss_fn: LossFn = loss_and_grad):
        """Initialize base optimizer.

        Args:
            config: Optimizer configuration
            loss_fn: Objective returning (loss, gradient) for a batch
        """
        self.config = config
        self.loss_fn = loss_fn
        self.state = OptimizerState()
        self.learning_rate = config.learning_rate

    def set_learning_rate(self, learning_rate: float):
        if not learning_rate > 0:
            raise ValueError(f"learning rate must be > 0, got {learning_rate}")
        self.learning_rate = learning_rate

    def begin_epoch(self, epoch: int):
        """Record the epoch in the schedule clock; subclasses may set s(t)."""
        self.state.schedule.epoch = epoch

    def summary(self) -> Dict[str, Any]:
        return {
            "optimizer": self.name,
            "learning_rate": self.learning_rate,
            "steps": self.state.step_count,
            "schedule_scale": self.state.schedule.scale,
        }

    @abstractmethod
    def step(self, params: ParameterSet, batch: Batch, plan=None) -> ParameterSet:
        """Take one update step and return the new parameters.

        Returns:
            Updated ParameterSet; `params` is left untouched
        """
        pass
