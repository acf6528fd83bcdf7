"""Progressive label-flip simulation.

Uncertain samples (small gap between the two largest logits) are more
likely to be picked; each picked sample is temporarily relabelled with its
best competing class. The flipped subset yields the simulated noise
gradient that NCSAM uses to build its correction term.
"""

from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from model.mlp import Batch, GradientSet, LossFn, ParameterSet, forward, loss_and_grad


LogitsFn = Callable[[ParameterSet, np.ndarray], np.ndarray]


class FlipPlanError(ValueError):
    """Raised for empty batches, empty plans or invalid candidate counts."""


@dataclass(frozen=True)
class LogitRecord:
    sample_index: int
    logits: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        if logits.ndim != 1 or logits.size < 2:
            raise FlipPlanError(f"A logit record needs at least 2 classes, got shape {logits.shape}")
        if not np.all(np.isfinite(logits)):
            raise FlipPlanError(f"Logits of sample {self.sample_index} are not finite")
        object.__setattr__(self, "logits", logits)

    @property
    def gap(self) -> float:
        return logit_gap(self.logits)


@dataclass
class FlipPlan:
    """Per-iteration flip selection.

    `selected` are row positions inside the batch; `sample_indices` are the
    matching dataset row ids. `probs` covers every row of the batch.
    """

    selected: np.ndarray
    sample_indices: np.ndarray
    flipped_labels: np.ndarray
    gaps: np.ndarray
    probs: np.ndarray

    def __len__(self) -> int:
        return len(self.selected)

    @property
    def is_empty(self) -> bool:
        return len(self.selected) == 0

    def rows(self, epoch: int, batch_number: int) -> List[dict]:
        """Records for flips.csv."""
        return [
            {
                "epoch": epoch,
                "batch": batch_number,
                "sample_index": int(index),
                "gap": float(gap),
                "flipped_label": int(label),
            }
            for index, gap, label in zip(self.sample_indices, self.gaps, self.flipped_labels)
        ]


def logit_gap(logits: Sequence[float]) -> float:
    """Largest minus second-largest logit."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1 or logits.size < 2:
        raise FlipPlanError(f"Logit gap needs at least 2 classes, got shape {logits.shape}")
    top_two = np.partition(logits, -2)[-2:]
    return float(top_two[1] - top_two[0])


def logit_gaps(logits: np.ndarray) -> np.ndarray:
    """Row-wise logit gaps for a (B, C) matrix."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[1] < 2:
        raise FlipPlanError(f"Logit gaps need a (B, C>=2) matrix, got shape {logits.shape}")
    top_two = np.partition(logits, -2, axis=1)[:, -2:]
    return top_two[:, 1] - top_two[:, 0]


def selection_probs(gaps: Sequence[float]) -> np.ndarray:
    """p_i proportional to 1 / (1 + gap_i), normalised over the whole batch."""
    gaps = np.asarray(gaps, dtype=np.float64)
    if gaps.size == 0:
        raise FlipPlanError("Cannot build selection probabilities from an empty gap list")
    if np.any(gaps < 0):
        raise FlipPlanError("Logit gaps must be non-negative")
    weights = 1.0 / (1.0 + gaps)
    return weights / weights.sum()


def sample_candidates(probs: Sequence[float], count: int, rng: np.random.Generator) -> np.ndarray:
    """Weighted sampling without replacement (Gumbel-top-k)."""
    probs = np.asarray(probs, dtype=np.float64)
    if not 1 <= count <= len(probs):
        raise FlipPlanError(f"Candidate count {count} outside [1, {len(probs)}]")
    keys = np.log(probs) + rng.gumbel(size=len(probs))
    return np.argsort(-keys, kind="stable")[:count]


def flip_top2(logits: Sequence[float], current_label: int) -> int:
    """Highest-logit class other than `current_label`; ties go to the lowest index."""
    masked = np.array(logits, dtype=np.float64)
    masked[int(current_label)] = -np.inf
    return int(np.argmax(masked))


def flip_count(batch_size: int, flip_ratio: float) -> int:
    return int(min(max(round(flip_ratio * batch_size), 1), batch_size))


def build_flip_plan(
    params: ParameterSet,
    batch: Batch,
    flip_ratio: float,
    rng: np.random.Generator,
    logits_fn: LogitsFn = forward,
) -> FlipPlan:
    """Score the batch on the unperturbed parameters and pick samples to flip.

    Flips are made against the OBSERVED labels of the batch.
    """
    if len(batch) == 0:
        raise FlipPlanError("Cannot build a flip plan for an empty batch")
    if not 0.0 < flip_ratio <= 1.0:
        raise FlipPlanError(f"Flip ratio must lie in (0, 1], got {flip_ratio}")

    logits = logits_fn(params, batch.features)
    gaps = logit_gaps(logits)
    probs = selection_probs(gaps)
    selected = sample_candidates(probs, flip_count(len(batch), flip_ratio), rng)

    flipped = np.array(
        [flip_top2(logits[row], batch.labels[row]) for row in selected], dtype=np.int64
    )
    return FlipPlan(
        selected=selected,
        sample_indices=batch.sample_indices[selected],
        flipped_labels=flipped,
        gaps=gaps[selected],
        probs=probs,
    )


def simulated_noise_gradient(
    params: ParameterSet,
    batch: Batch,
    plan: FlipPlan,
    loss_fn: LossFn = loss_and_grad,
) -> GradientSet:
    """Mean loss gradient over the selected rows, evaluated on their flipped labels."""
    if plan is None or plan.is_empty:
        raise FlipPlanError("Simulated noise gradient needs a non-empty flip plan")
    if np.any(plan.selected < 0) or np.any(plan.selected >= len(batch)):
        raise FlipPlanError("Flip plan selects rows outside the batch")

    flipped_batch = batch.subset(plan.selected, labels=plan.flipped_labels)
    _, grad = loss_fn(params, flipped_batch)
    return grad
