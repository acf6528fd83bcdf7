"""Noise package: label corruption and label-flip simulation."""

from .injection import (
    NoiseConfigError,
    NoiseSpec,
    NoisyDataset,
    corrupt_asymmetric,
    corrupt_beta_mixture,
    corrupt_instance_dependent,
    corrupt_symmetric,
    default_pair_map,
    load_noisy_dataset,
    make_noisy_dataset,
    save_noisy_dataset,
)
from .flip_simulator import (
    FlipPlan,
    FlipPlanError,
    LogitRecord,
    build_flip_plan,
    flip_top2,
    logit_gap,
    sample_candidates,
    selection_probs,
    simulated_noise_gradient,
)

__all__ = [
    "NoiseConfigError",
    "NoiseSpec",
    "NoisyDataset",
    "corrupt_asymmetric",
    "corrupt_beta_mixture",
    "corrupt_instance_dependent",
    "corrupt_symmetric",
    "default_pair_map",
    "load_noisy_dataset",
    "make_noisy_dataset",
    "save_noisy_dataset",
    "FlipPlan",
    "FlipPlanError",
    "LogitRecord",
    "build_flip_plan",
    "flip_top2",
    "logit_gap",
    "sample_candidates",
    "selection_probs",
    "simulated_noise_gradient",
]
