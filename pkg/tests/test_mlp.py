"""
Tests for the tensor model: initialization, forward pass, loss and parameter algebra.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

import numpy as np
import pytest

from conftest import assert_gradient_close, finite_difference_grad, random_batch
from model.mlp import (
    Batch,
    GradientSet,
    MlpSpec,
    ParameterSet,
    ShapeMismatchError,
    accuracy,
    forward,
    grad_dot,
    grad_l2_norm,
    init_params,
    loss_and_grad,
    param_axpy,
)


def test_init_is_deterministic():
    """Same spec and seed give identical parameters."""
    spec = MlpSpec(layer_widths=(2, 3, 2), init_seed=7)
    first, second = init_params(spec), init_params(spec)
    assert first.names == second.names
    for a, b in zip(first.tensors(), second.tensors()):
        assert np.array_equal(a, b)


def test_init_biases_zero_and_weights_bounded():
    """Biases start at zero and weights respect the Glorot bound."""
    params = init_params(MlpSpec(layer_widths=(2, 3, 2), init_seed=7))
    assert np.all(params["layer0.bias"] == 0.0)
    assert np.all(params["layer1.bias"] == 0.0)
    assert np.all(np.abs(params["layer0.weight"]) <= np.sqrt(6.0 / 5.0))
    assert params.names == ["layer0.weight", "layer0.bias", "layer1.weight", "layer1.bias"]


def test_parameter_count():
    """Widths [4, 8, 8, 3] give 139 parameters."""
    spec = MlpSpec(layer_widths=(4, 8, 8, 3))
    assert spec.param_count == 139
    assert init_params(spec).size == 139


def test_invalid_spec_rejected():
    """Specs without a usable output layer are refused."""
    with pytest.raises(ValueError):
        MlpSpec(layer_widths=(4,))
    with pytest.raises(ValueError):
        MlpSpec(layer_widths=(4, 1))
    with pytest.raises(ValueError):
        MlpSpec(layer_widths=(4, 3), activation="tanh")


def test_forward_zero_params_gives_zero_logits(small_params, rng):
    """Zero weights and biases map any input to zero logits."""
    zeros = small_params.zeros_like()
    logits = forward(zeros, rng.standard_normal((3, 4)))
    assert np.array_equal(logits, np.zeros((3, 3)))


def test_forward_identity_layer():
    """A single identity layer returns its input."""
    params = ParameterSet([("layer0.weight", np.eye(2)), ("layer0.bias", np.zeros(2))])
    assert np.array_equal(forward(params, np.array([[1.0, 2.0]])), np.array([[1.0, 2.0]]))


def test_forward_shape(small_params, rng):
    """Batch of 5 gives 5 x C logits."""
    assert forward(small_params, rng.standard_normal((5, 4))).shape == (5, 3)


def test_forward_dimension_mismatch(small_params, rng):
    """Wrong feature width raises a shape error."""
    with pytest.raises(ShapeMismatchError):
        forward(small_params, rng.standard_normal((5, 7)))


def test_uniform_logits_loss_is_log_c(rng):
    """Zero parameters with 10 classes give loss ln 10."""
    params = init_params(MlpSpec(layer_widths=(3, 10))).zeros_like()
    batch = random_batch(rng, size=4, input_dim=3, num_classes=10)
    loss, _ = loss_and_grad(params, batch)
    assert loss == pytest.approx(np.log(10.0), abs=1e-12)


def test_gradient_matches_finite_differences():
    """Analytic gradients agree with central differences on random small MLPs."""
    rng = np.random.default_rng(99)
    for trial in range(20):
        widths = (3, int(rng.integers(2, 6)), int(rng.integers(2, 5)))
        params = init_params(MlpSpec(layer_widths=widths, init_seed=trial))
        # move biases off zero so ReLU kinks are unlikely to sit at the sample points
        params = params.unflatten(params.flatten() + 0.1 * rng.standard_normal(params.size))
        batch = random_batch(rng, size=5, input_dim=3, num_classes=widths[-1])

        _, grad = loss_and_grad(params, batch)
        numeric = finite_difference_grad(loss_and_grad, params, batch)
        assert params.size <= 200
        assert_gradient_close(grad.flatten(), numeric)


def test_gradient_with_soft_targets(rng):
    """Soft label rows use the same exact gradient."""
    params = init_params(MlpSpec(layer_widths=(4, 5, 3), init_seed=2))
    targets = rng.dirichlet(np.ones(3), size=6)
    batch = Batch(
        features=rng.standard_normal((6, 4)),
        labels=targets.argmax(axis=1),
        sample_indices=np.arange(6),
        targets=targets,
    )
    _, grad = loss_and_grad(params, batch)
    numeric = finite_difference_grad(loss_and_grad, params, batch)
    assert_gradient_close(grad.flatten(), numeric)


def test_gradient_check_is_relative_above_the_absolute_bound():
    """A 1e-4 relative miss fails on small and large coordinates alike; tiny gaps at zero pass."""
    with pytest.raises(AssertionError):
        assert_gradient_close(np.array([1e-4]), np.array([1e-4 + 2e-8]))
    with pytest.raises(AssertionError):
        assert_gradient_close(np.array([3.0]), np.array([3.0006]))
    assert_gradient_close(np.array([0.0, 2.0]), np.array([5e-10, 2.0 + 1e-7]))


def test_large_true_logit_loss_vanishes():
    """A dominant true-class logit drives the loss to zero without overflow."""
    params = ParameterSet([("layer0.weight", np.array([[1000.0, 0.0]])), ("layer0.bias", np.zeros(2))])
    batch = Batch(features=np.array([[1.0]]), labels=np.array([0]), sample_indices=np.array([0]))
    loss, grad = loss_and_grad(params, batch)
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.isfinite(grad.flatten()))


def test_loss_is_deterministic(small_params, small_batch):
    """Repeated calls return bitwise-identical loss and gradient."""
    loss_a, grad_a = loss_and_grad(small_params, small_batch)
    loss_b, grad_b = loss_and_grad(small_params, small_batch)
    assert loss_a == loss_b
    assert np.array_equal(grad_a.flatten(), grad_b.flatten())


def test_loss_convex_along_lines_for_linear_model(rng):
    """Midpoint inequality holds along random lines for a single linear layer."""
    spec = MlpSpec(layer_widths=(4, 3), init_seed=5)
    batch = random_batch(rng, size=8, input_dim=4, num_classes=3)
    base = init_params(spec)
    for _ in range(25):
        a = base.unflatten(rng.standard_normal(base.size))
        b = base.unflatten(rng.standard_normal(base.size))
        mid = a.add(b).scale(0.5)
        loss_a, _ = loss_and_grad(a, batch)
        loss_b, _ = loss_and_grad(b, batch)
        loss_mid, _ = loss_and_grad(mid, batch)
        assert loss_mid <= 0.5 * (loss_a + loss_b) + 1e-12


def test_param_axpy(small_params):
    """axpy identities: zero step, inverse step and round trip."""
    as_grad = small_params.as_gradient()
    assert param_axpy(small_params, 0.0, as_grad).allclose(small_params)
    assert param_axpy(small_params, -1.0, as_grad).l2_norm() == 0.0

    before = small_params.flatten().copy()
    v = small_params.unflatten(np.linspace(-1, 1, small_params.size)).as_gradient()
    there = param_axpy(small_params, 1.0, v)
    back = param_axpy(there, -1.0, v)
    assert back.allclose(small_params, atol=1e-12)
    assert np.array_equal(small_params.flatten(), before)


def test_axpy_rejects_incongruent(small_params):
    """Mismatched layouts raise."""
    other = GradientSet([("g", np.zeros(3))])
    with pytest.raises(ShapeMismatchError):
        param_axpy(small_params, 1.0, other)


def test_norm_and_dot():
    """Norm over flattened entries, dot identities."""
    g = GradientSet([("a", np.array([3.0])), ("b", np.array([4.0]))])
    assert grad_l2_norm(g) == 5.0
    assert grad_dot(g, g) == pytest.approx(grad_l2_norm(g) ** 2, abs=1e-12)

    e1 = GradientSet([("a", np.array([1.0, 0.0]))])
    e2 = GradientSet([("a", np.array([0.0, 1.0]))])
    assert grad_dot(e1, e2) == 0.0


def test_flatten_unflatten_keeps_layout(small_params):
    """unflatten restores names and shapes in entry order."""
    restored = small_params.unflatten(small_params.flatten())
    assert restored.names == small_params.names
    assert restored.shapes == small_params.shapes
    assert restored.allclose(small_params, atol=0.0)


def test_batch_validation():
    """Batches need matching label and index lengths and at least one row."""
    with pytest.raises(ShapeMismatchError):
        Batch(features=np.zeros((2, 3)), labels=np.array([0]), sample_indices=np.array([0, 1]))
    with pytest.raises(ValueError):
        Batch(features=np.zeros((0, 3)), labels=np.array([], dtype=int), sample_indices=np.array([], dtype=int))


def test_accuracy_empty_is_zero(small_params):
    """No rows means accuracy 0.0."""
    assert accuracy(small_params, np.zeros((0, 4)), np.array([], dtype=int)) == 0.0
