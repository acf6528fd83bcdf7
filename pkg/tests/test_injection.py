"""
Tests for the label corruption models and the noisy dataset format.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

import numpy as np
import pytest
from scipy.stats import chisquare

from model.mlp import MlpSpec, ParameterSet, init_params, predict_proba
from noise.injection import (
    NoiseConfigError,
    NoiseSpec,
    corrupt_asymmetric,
    corrupt_beta_mixture,
    corrupt_instance_dependent,
    corrupt_symmetric,
    default_pair_map,
    load_noisy_dataset,
    make_noisy_dataset,
    save_noisy_dataset,
)


def binomial_band(rate, n):
    return 3.0 * np.sqrt(rate * (1.0 - rate) / n)


@pytest.fixture
def labels_10k():
    return np.random.default_rng(0).integers(0, 10, size=10_000)


def test_symmetric_zero_rate_is_identity(labels_10k):
    """alpha = 0 leaves every label alone."""
    observed, mask = corrupt_symmetric(labels_10k, 10, 0.0, seed=1)
    assert np.array_equal(observed, labels_10k)
    assert not mask.any()


def test_symmetric_full_rate_binary_flips_everything():
    """alpha = 1 with two classes flips every label."""
    labels = np.array([0, 1, 1, 0, 1])
    observed, mask = corrupt_symmetric(labels, 2, 1.0, seed=3)
    assert np.array_equal(observed, 1 - labels)
    assert mask.all()


@pytest.mark.parametrize("alpha", [0.2, 0.4, 0.6, 0.8])
def test_symmetric_rate_concentrates(labels_10k, alpha):
    """Realised fraction lies within 3 sigma of alpha."""
    _, mask = corrupt_symmetric(labels_10k, 10, alpha, seed=5)
    assert abs(mask.mean() - alpha) <= binomial_band(alpha, 10_000)


def test_symmetric_mask_is_sound(labels_10k):
    """Mask marks exactly the changed labels."""
    observed, mask = corrupt_symmetric(labels_10k, 10, 0.4, seed=5)
    assert np.array_equal(mask, observed != labels_10k)


def test_symmetric_is_deterministic(labels_10k):
    """Same seed, same corruption."""
    a, _ = corrupt_symmetric(labels_10k, 10, 0.4, seed=8)
    b, _ = corrupt_symmetric(labels_10k, 10, 0.4, seed=8)
    assert np.array_equal(a, b)


def test_symmetric_targets_uniform_over_other_classes():
    """Flip offsets are uniform over the C - 1 other classes."""
    labels = np.random.default_rng(1).integers(0, 10, size=100_000)
    observed, mask = corrupt_symmetric(labels, 10, 0.5, seed=2)
    offsets = (observed[mask] - labels[mask]) % 10
    assert offsets.min() >= 1
    counts = np.bincount(offsets, minlength=10)[1:]
    assert chisquare(counts).pvalue > 0.01


def test_symmetric_needs_two_classes():
    """A single class cannot be corrupted."""
    with pytest.raises(NoiseConfigError):
        corrupt_symmetric(np.zeros(4, dtype=int), 1, 0.5, seed=0)


def test_asymmetric_zero_rate_is_identity(labels_10k):
    """alpha = 0 leaves labels unchanged."""
    observed, mask = corrupt_asymmetric(labels_10k, default_pair_map(10), 0.0, seed=0)
    assert np.array_equal(observed, labels_10k)
    assert not mask.any()


def test_asymmetric_full_rate_is_shift():
    """Cyclic pair map with alpha = 1 shifts every label."""
    labels = np.array([0, 1, 2, 3, 3, 2])
    observed, mask = corrupt_asymmetric(labels, default_pair_map(4), 1.0, seed=0)
    assert np.array_equal(observed, (labels + 1) % 4)
    assert mask.all()


@pytest.mark.parametrize("alpha", [0.2, 0.4, 0.45, 0.6, 0.8])
def test_asymmetric_rate_concentrates(labels_10k, alpha):
    """Realised fraction within 3 sigma of alpha."""
    _, mask = corrupt_asymmetric(labels_10k, default_pair_map(10), alpha, seed=4)
    assert abs(mask.mean() - alpha) <= binomial_band(alpha, 10_000)


def test_pair_map_fixed_point_rejected():
    """A class mapped to itself is an error."""
    with pytest.raises(NoiseConfigError, match="fixed points"):
        corrupt_asymmetric(np.array([0, 1]), [1, 1, 0], 0.5, seed=0)


def test_instance_dependent_zero_rate(rng):
    """alpha = 0 leaves labels unchanged."""
    params = init_params(MlpSpec(layer_widths=(3, 4), init_seed=1))
    features = rng.standard_normal((50, 3))
    labels = rng.integers(0, 4, size=50)
    observed, mask, effective = corrupt_instance_dependent(features, labels, params, 0.0, seed=0)
    assert np.array_equal(observed, labels)
    assert effective == 0.0


def test_instance_dependent_confident_scorer_warns(caplog):
    """A one-hot scorer gives no flip weight and reports effective rate 0."""
    params = ParameterSet([("layer0.weight", np.array([[1000.0, -1000.0]])), ("layer0.bias", np.zeros(2))])
    features = np.array([[1.0], [-1.0], [1.0], [-1.0]])
    labels = np.array([0, 1, 0, 1])
    with caplog.at_level("WARNING"):
        observed, mask, effective = corrupt_instance_dependent(features, labels, params, 0.3, seed=0)
    assert effective == 0.0
    assert not mask.any()
    assert np.array_equal(observed, labels)
    assert "fully confident" in caplog.text


def test_instance_dependent_rate_and_targets(rng):
    """Realised fraction near alpha and flips never land on the true label."""
    params = init_params(MlpSpec(layer_widths=(6, 5), init_seed=3))
    features = rng.standard_normal((10_000, 6))
    labels = rng.integers(0, 5, size=10_000)
    observed, mask, effective = corrupt_instance_dependent(features, labels, params, 0.2, seed=9)
    assert effective == pytest.approx(0.2, abs=1e-9)
    assert abs(mask.mean() - 0.2) <= 0.02
    assert np.all(observed[mask] != labels[mask])


def test_instance_dependent_target_is_best_other_class(rng):
    """Flips go to the top class when it is wrong, else to the runner-up."""
    params = init_params(MlpSpec(layer_widths=(6, 5), init_seed=3))
    features = rng.standard_normal((5_000, 6))
    labels = rng.integers(0, 5, size=5_000)
    observed, mask, _ = corrupt_instance_dependent(features, labels, params, 0.3, seed=2)

    ranked = np.argsort(-predict_proba(params, features), axis=1)
    expected = np.where(ranked[:, 0] == labels, ranked[:, 1], ranked[:, 0])
    assert mask.any()
    assert np.array_equal(observed[mask], expected[mask])
    assert (ranked[mask, 0] == labels[mask]).any()
    assert (ranked[mask, 0] != labels[mask]).any()


def test_beta_mixture_zero_rate_keeps_one_hot():
    """alpha = 0 keeps rows one-hot."""
    onehot = np.eye(4)[[0, 1, 2, 3, 0]]
    soft, selected = corrupt_beta_mixture(onehot, 0.0, 1.0, 1.0, seed=0)
    assert np.array_equal(soft, onehot)
    assert not selected.any()


def test_beta_mixture_rows_sum_to_one():
    """Every soft row is a distribution."""
    onehot = np.eye(5)[np.random.default_rng(2).integers(0, 5, size=1000)]
    soft, _ = corrupt_beta_mixture(onehot, 0.6, 2.0, 0.5, seed=1)
    assert np.allclose(soft.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(soft >= 0.0)


def test_beta_mixture_expected_true_class_mass():
    """alpha = 1, beta = gamma, C = 5 gives expected true-class mass 0.2."""
    labels = np.random.default_rng(6).integers(0, 5, size=100_000)
    soft, _ = corrupt_beta_mixture(np.eye(5)[labels], 1.0, 1.0, 1.0, seed=7)
    mass = soft[np.arange(len(labels)), labels].mean()
    assert mass == pytest.approx(0.2, abs=0.002)


def test_beta_mixture_rejects_bad_params():
    """Non-positive Beta parameters are refused."""
    with pytest.raises(NoiseConfigError):
        corrupt_beta_mixture(np.eye(3), 0.5, 0.0, 1.0, seed=0)


def test_noise_spec_validation():
    """Unknown kinds and out-of-range rates raise."""
    with pytest.raises(NoiseConfigError):
        NoiseSpec(kind="open_set")
    with pytest.raises(NoiseConfigError):
        NoiseSpec(rate=1.5)


def test_instance_dependent_needs_scorer(rng):
    """make_noisy_dataset refuses instance noise without a scoring model."""
    with pytest.raises(NoiseConfigError):
        make_noisy_dataset(
            rng.standard_normal((4, 2)), np.array([0, 1, 0, 1]),
            NoiseSpec(kind="instance_dependent", rate=0.2), num_classes=2,
        )


def test_noisy_dataset_save_load(tmp_path, rng):
    """Saved datasets reload with identical arrays and a sorted sidecar."""
    features = rng.standard_normal((30, 3))
    labels = rng.integers(0, 3, size=30)
    spec = NoiseSpec(kind="beta_mixture", rate=0.5, seed=4)
    dataset = make_noisy_dataset(features, labels, spec, num_classes=3)

    out = save_noisy_dataset(dataset, str(tmp_path / "noisy"), spec)
    loaded = load_noisy_dataset(str(out))

    assert np.array_equal(loaded.features, features)
    assert np.array_equal(loaded.true_labels, labels)
    assert np.array_equal(loaded.observed_labels, dataset.observed_labels)
    assert np.array_equal(loaded.corrupted, dataset.corrupted)
    assert np.array_equal(loaded.soft_labels, dataset.soft_labels)
    assert (out / "features.bin").stat().st_size == 30 * 3 * 8

    sidecar = json.loads((out / "dataset.json").read_text(encoding="utf-8"))
    assert list(sidecar) == sorted(sidecar)
    assert sidecar["shape"] == [30, 3]
    assert sidecar["spec"]["kind"] == "beta_mixture"

    header = (out / "labels.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "index,true_label,observed_label,corrupted"


def test_load_missing_sidecar(tmp_path):
    """A directory without dataset.json is reported as missing."""
    with pytest.raises(FileNotFoundError):
        load_noisy_dataset(str(tmp_path))
