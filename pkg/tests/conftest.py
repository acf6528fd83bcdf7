"""Shared test fixtures and utilities."""

import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

import numpy as np
import pytest

from model.mlp import Batch, GradientSet, MlpSpec, ParameterSet, init_params


def quadratic_loss(params, batch):
    """L(w) = 1/2 ||w||^2 over a single entry named 'w'; the batch is ignored."""
    w = params["w"]
    return 0.5 * float(w @ w), GradientSet([("w", w.copy())])


def scalar_params(value: float) -> ParameterSet:
    return ParameterSet([("w", np.array([value], dtype=np.float64))])


def flat_gradient(values) -> GradientSet:
    return GradientSet([("g", np.asarray(values, dtype=np.float64))])


def random_batch(rng, size: int, input_dim: int, num_classes: int) -> Batch:
    return Batch(
        features=rng.standard_normal((size, input_dim)),
        labels=rng.integers(0, num_classes, size=size),
        sample_indices=np.arange(size),
    )


def finite_difference_grad(loss_fn, params: ParameterSet, batch: Batch, h: float = 1e-5) -> np.ndarray:
    """Central differences over the flattened parameters."""
    flat = params.flatten()
    numeric = np.zeros_like(flat)
    for i in range(flat.size):
        step = np.zeros_like(flat)
        step[i] = h
        plus, _ = loss_fn(params.unflatten(flat + step), batch)
        minus, _ = loss_fn(params.unflatten(flat - step), batch)
        numeric[i] = (plus - minus) / (2 * h)
    return numeric


def assert_gradient_close(analytic: np.ndarray, numeric: np.ndarray, rtol: float = 1e-6, atol: float = 1e-9) -> None:
    """Each coordinate has relative error below rtol, or absolute error at most atol.

    Relative error is |a - n| / (|a| + |n|). The absolute bound only decides
    coordinates where both gradients are near zero.
    """
    error = np.abs(analytic - numeric)
    scale = np.abs(analytic) + np.abs(numeric)
    ok = (error <= atol) | (error < rtol * scale)
    assert ok.all(), f"gradient mismatch at {np.flatnonzero(~ok)[:5].tolist()}: max abs error {error.max():.3e}"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_spec():
    return MlpSpec(layer_widths=(4, 8, 3), init_seed=7)


@pytest.fixture
def small_params(small_spec):
    return init_params(small_spec)


@pytest.fixture
def small_batch(rng):
    return random_batch(rng, size=6, input_dim=4, num_classes=3)


@pytest.fixture
def unit_batch():
    """One-row placeholder batch for objectives that ignore the data."""
    return Batch(features=np.zeros((1, 1)), labels=np.array([0]), sample_indices=np.array([0]))


@pytest.fixture
def tiny_raw_config(tmp_path):
    """A raw config small enough for a full run in well under a second."""
    return {
        "experiment": {
            "name": "tiny",
            "epochs": 6,
            "batch_size": 32,
            "seeds": [3],
            "output_dir": str(tmp_path / "runs"),
            "show_progress": False,
        },
        "dataset": {
            "kind": "gaussian_blobs",
            "n_samples": 200,
            "n_features": 5,
            "n_classes": 3,
            "separation": 3.0,
            "seed": 11,
        },
        "noise": {"kind": "symmetric", "rate": 0.3},
        "model": {"hidden_widths": [8]},
        "optimizer": {
            "name": "ncsam",
            "learning_rate": 0.05,
            "sam_radius": 0.05,
            "kappa": 0.2,
            "warmup_epochs": 2,
            "ramp_epochs": 2,
            "flip_ratio": 0.5,
        },
        "diagnostics": {"max_batches": 2},
    }
