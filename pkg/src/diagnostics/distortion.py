"""Perturbation distortion caused by the gradient of mislabelled samples.

The mini-batch gradient splits into a clean part and a noise part. The SAM
perturbation follows their sum, so the noise part rotates it (cos theta) and
rescales it (over- or under-perturbation).
"""

from dataclasses import dataclass
from typing import Sequence
import logging

import numpy as np

from model.mlp import Batch, GradientSet, LossFn, ParameterSet, loss_and_grad

logger = logging.getLogger(__name__)

DEGENERATE_TOL = 1e-12
REGIMES = ("over_perturbation", "under_perturbation", "neutral")


class DegenerateInputError(ValueError):
    """Raised when a diagnostic needs a non-zero gradient and gets a zero one."""


@dataclass(frozen=True)
class DistortionReport:
    cos_theta: float
    clean_norm: float
    noise_norm: float
    biased_norm: float
    inner_product: float
    regime: str

    def to_dict(self) -> dict:
        return {
            "cos_theta": self.cos_theta,
            "clean_norm": self.clean_norm,
            "noise_norm": self.noise_norm,
            "biased_norm": self.biased_norm,
            "inner_product": self.inner_product,
            "regime": self.regime,
        }


@dataclass(frozen=True)
class GradientSplit:
    """Clean/noisy components of one batch gradient; they sum to the batch mean gradient."""

    clean: GradientSet
    noise: GradientSet
    clean_count: int
    noise_count: int

    @property
    def has_empty_subset(self) -> bool:
        return self.clean_count == 0 or self.noise_count == 0


def _regime(biased_norm: float, clean_norm: float) -> str:
    if abs(biased_norm - clean_norm) <= DEGENERATE_TOL:
        return "neutral"
    return "over_perturbation" if biased_norm > clean_norm else "under_perturbation"


def distortion_report(g_clean: GradientSet, g_noise: GradientSet) -> DistortionReport:
    """Angle and norms of the biased gradient g_clean + g_noise relative to g_clean."""
    g_clean.check_congruent(g_noise)
    biased = g_clean.add(g_noise)

    clean_norm = g_clean.l2_norm()
    biased_norm = biased.l2_norm()
    if clean_norm <= DEGENERATE_TOL:
        raise DegenerateInputError("Clean gradient has zero norm")
    if biased_norm <= DEGENERATE_TOL:
        raise DegenerateInputError("Biased gradient g_clean + g_noise has zero norm")

    cos_theta = g_clean.dot(biased) / (clean_norm * biased_norm)
    return DistortionReport(
        cos_theta=float(np.clip(cos_theta, -1.0, 1.0)),
        clean_norm=clean_norm,
        noise_norm=g_noise.l2_norm(),
        biased_norm=biased_norm,
        inner_product=g_clean.dot(g_noise),
        regime=_regime(biased_norm, clean_norm),
    )


def empirical_gradient_split(
    params: ParameterSet,
    batch: Batch,
    corruption_mask: Sequence[bool],
    loss_fn: LossFn = loss_and_grad,
) -> GradientSplit:
    """Split the batch mean gradient by the ground-truth corruption mask.

    Each subset gradient is the subset mean weighted by subset_size / B, so
    clean + noise equals the full-batch mean gradient. An empty subset
    contributes a zero gradient.
    """
    mask = np.asarray(corruption_mask, dtype=bool)
    if mask.shape != (len(batch),):
        raise ValueError(f"Corruption mask of shape {mask.shape} does not match batch size {len(batch)}")

    def _part(rows: np.ndarray) -> GradientSet:
        if rows.size == 0:
            return params.zeros_like().as_gradient()
        _, grad = loss_fn(params, batch.subset(rows))
        return grad.scale(rows.size / len(batch)).as_gradient()

    noisy_rows = np.flatnonzero(mask)
    clean_rows = np.flatnonzero(~mask)
    split = GradientSplit(
        clean=_part(clean_rows),
        noise=_part(noisy_rows),
        clean_count=int(clean_rows.size),
        noise_count=int(noisy_rows.size),
    )
    if split.has_empty_subset:
        logger.debug(
            f"Gradient split with an empty subset: {split.clean_count} clean, "
            f"{split.noise_count} noisy"
        )
    return split


def parameter_deviation(params_a: ParameterSet, params_b: ParameterSet) -> float:
    """||W_a - W_b||, the deviation proxy between two same-seed trajectories."""
    params_a.check_congruent(params_b)
    return params_a.axpy(-1.0, params_b).l2_norm()
