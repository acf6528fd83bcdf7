"""Sharpness estimate: worst loss increase over a few directions of radius rho."""

import numpy as np

from model.mlp import Batch, LossFn, ParameterSet, loss_and_grad
from optimizers.sam import sam_perturbation


def sharpness_estimate(
    params: ParameterSet,
    batch: Batch,
    rho: float,
    trials: int,
    rng: np.random.Generator,
    loss_fn: LossFn = loss_and_grad,
) -> float:
    """max over {SAM direction, trials - 1 random directions} of L(W + eps) - L(W)."""
    if trials < 1:
        raise ValueError(f"Sharpness needs at least one trial, got {trials}")
    if rho < 0:
        raise ValueError(f"Sharpness radius must be >= 0, got {rho}")

    base_loss, grad = loss_fn(params, batch)
    if rho == 0.0:
        return 0.0

    directions = [sam_perturbation(grad, rho)]
    for _ in range(trials - 1):
        direction = rng.standard_normal(params.size)
        norm = np.linalg.norm(direction)
        directions.append(params.unflatten(direction * (rho / norm)).as_gradient())

    increases = [loss_fn(params.axpy(1.0, eps).as_parameters(), batch)[0] - base_loss for eps in directions]
    return float(max(increases))
