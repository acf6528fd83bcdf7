"""Label corruption models and the on-disk format for noisy datasets."""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple
import json
import logging

import numpy as np
import pandas as pd

from model.mlp import ParameterSet, predict_proba

logger = logging.getLogger(__name__)

NOISE_KINDS = ("none", "symmetric", "asymmetric_pair", "instance_dependent", "beta_mixture")
HARD_NOISE_KINDS = ("none", "symmetric", "asymmetric_pair", "instance_dependent")

FEATURES_FILE = "features.bin"
SOFT_LABELS_FILE = "soft_labels.bin"
LABELS_FILE = "labels.csv"
SIDECAR_FILE = "dataset.json"


class NoiseConfigError(ValueError):
    """Raised for invalid corruption parameters."""


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "symmetric"
    rate: float = 0.0
    beta_params: Tuple[float, float] = (1.0, 1.0)
    pair_map: Optional[Tuple[int, ...]] = None
    seed: int = 0
    include_self_flip: bool = False

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise NoiseConfigError(f"Unknown noise kind '{self.kind}', expected one of {NOISE_KINDS}")
        if not 0.0 <= self.rate <= 1.0:
            raise NoiseConfigError(f"Noise rate must lie in [0, 1], got {self.rate}")
        beta, gamma = self.beta_params
        if beta <= 0 or gamma <= 0:
            raise NoiseConfigError(f"Beta parameters must be positive, got {self.beta_params}")
        if self.pair_map is not None:
            object.__setattr__(self, "pair_map", tuple(int(c) for c in self.pair_map))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["beta_params"] = list(self.beta_params)
        data["pair_map"] = None if self.pair_map is None else list(self.pair_map)
        return data


@dataclass
class NoisyDataset:
    features: np.ndarray
    true_labels: np.ndarray
    observed_labels: np.ndarray
    corrupted: np.ndarray
    class_count: int
    soft_labels: Optional[np.ndarray] = field(default=None)
    effective_rate: Optional[float] = field(default=None)

    def __len__(self) -> int:
        return len(self.true_labels)

    @property
    def is_soft(self) -> bool:
        return self.soft_labels is not None

    @property
    def corrupted_fraction(self) -> float:
        return float(np.mean(self.corrupted)) if len(self) else 0.0


def _check_class_count(num_classes: int):
    if num_classes < 2:
        raise NoiseConfigError(f"Label corruption needs at least 2 classes, got {num_classes}")


def default_pair_map(num_classes: int) -> np.ndarray:
    """Cyclic adjacent-class map y -> (y + 1) mod C."""
    _check_class_count(num_classes)
    return (np.arange(num_classes) + 1) % num_classes


def validate_pair_map(pair_map: Sequence[int], num_classes: Optional[int] = None) -> np.ndarray:
    pair_map = np.asarray(pair_map, dtype=np.int64)
    size = len(pair_map) if num_classes is None else num_classes
    _check_class_count(size)
    if pair_map.shape != (size,):
        raise NoiseConfigError(f"Pair map must have {size} entries, got {pair_map.shape}")
    if pair_map.min() < 0 or pair_map.max() >= size:
        raise NoiseConfigError(f"Pair map values must lie in [0, {size}): {pair_map.tolist()}")
    fixed = np.flatnonzero(pair_map == np.arange(size))
    if fixed.size:
        raise NoiseConfigError(f"Pair map has fixed points at classes {fixed.tolist()}")
    return pair_map


def corrupt_symmetric(
    labels: np.ndarray,
    num_classes: int,
    rate: float,
    seed: int,
    include_self_flip: bool = False,
) -> Tuple[np.ndarray, np.ndarray]:
    """Flip each label with probability `rate` to a uniformly drawn class.

    By default the original class is excluded so the realised noise rate
    equals `rate`; `include_self_flip` draws over all C classes instead.
    """
    _check_class_count(num_classes)
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)

    selected = rng.random(len(labels)) < rate
    observed = labels.copy()
    if include_self_flip:
        observed[selected] = rng.integers(0, num_classes, size=int(selected.sum()))
    else:
        offsets = rng.integers(1, num_classes, size=int(selected.sum()))
        observed[selected] = (labels[selected] + offsets) % num_classes
    return observed, observed != labels


def corrupt_asymmetric(
    labels: np.ndarray, pair_map: Sequence[int], rate: float, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """With probability `rate` move label y to pair_map[y]."""
    pair_map = validate_pair_map(pair_map)
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)

    selected = rng.random(len(labels)) < rate
    observed = np.where(selected, pair_map[labels], labels)
    return observed, observed != labels


def _flip_probabilities(weights: np.ndarray, rate: float) -> np.ndarray:
    """Scale weights so their mean is `rate`, clamping at 1 and refilling the rest."""
    probs = np.zeros_like(weights)
    target = rate * len(weights)
    free = weights > 0
    while free.any():
        budget = target - probs[~free].sum()
        if budget <= 0:
            break
        scaled = weights[free] * budget / weights[free].sum()
        if (scaled <= 1.0).all():
            probs[free] = scaled
            break
        # clamp the saturated samples and redistribute among the others
        saturated = np.flatnonzero(free)[scaled > 1.0]
        probs[saturated] = 1.0
        free[saturated] = False
    return probs


def corrupt_instance_dependent(
    features: np.ndarray,
    labels: np.ndarray,
    params: ParameterSet,
    rate: float,
    seed: int,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """Flip probability proportional to scorer uncertainty (1 - max softmax).

    The flip target is the scorer's highest-scoring class other than the true
    label. Returns (observed, mask, effective_rate) where effective_rate is the
    expected flip fraction after clamping.
    """
    labels = np.asarray(labels, dtype=np.int64)
    probs = predict_proba(params, features)
    _check_class_count(probs.shape[1])
    rng = np.random.default_rng(seed)

    uncertainty = np.clip(1.0 - probs.max(axis=1), 0.0, None)
    if rate > 0 and uncertainty.sum() <= 0.0:
        logger.warning("Scoring model is fully confident; no sample can be flipped (effective rate 0)")
        return labels.copy(), np.zeros(len(labels), dtype=bool), 0.0

    flip_probs = _flip_probabilities(uncertainty, rate) if rate > 0 else np.zeros(len(labels))
    effective_rate = float(flip_probs.mean()) if len(labels) else 0.0
    if effective_rate < rate - 1e-12:
        logger.warning(
            f"Requested instance-dependent rate {rate:.4f} is infeasible; "
            f"clamped to effective rate {effective_rate:.4f}"
        )

    masked = probs.copy()
    masked[np.arange(len(labels)), labels] = -np.inf
    targets = np.argmax(masked, axis=1)

    selected = rng.random(len(labels)) < flip_probs
    observed = np.where(selected, targets, labels)
    return observed, observed != labels, effective_rate


def corrupt_beta_mixture(
    onehot_labels: np.ndarray, rate: float, beta: float, gamma: float, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Replace selected rows by (1 - rate) * y + rate * u, u from normalised Beta draws.

    Returns (soft_labels, selected_mask).
    """
    if beta <= 0 or gamma <= 0:
        raise NoiseConfigError(f"Beta parameters must be positive, got ({beta}, {gamma})")
    onehot = np.asarray(onehot_labels, dtype=np.float64)
    if onehot.ndim != 2:
        raise NoiseConfigError(f"One-hot labels must be 2-D, got shape {onehot.shape}")
    rng = np.random.default_rng(seed)

    num_rows, num_classes = onehot.shape
    selected = rng.random(num_rows) < rate
    draws = rng.beta(beta, gamma, size=(num_rows, num_classes))
    noise = draws / draws.sum(axis=1, keepdims=True)

    soft = np.where(selected[:, None], (1.0 - rate) * onehot + rate * noise, onehot)
    return soft, selected


def make_noisy_dataset(
    features: np.ndarray,
    labels: np.ndarray,
    spec: NoiseSpec,
    num_classes: int,
    scorer_params: Optional[ParameterSet] = None,
) -> NoisyDataset:
    """Apply `spec` to clean labels and return the dataset with its ground truth."""
    labels = np.asarray(labels, dtype=np.int64)
    features = np.asarray(features, dtype=np.float64)
    soft, effective_rate = None, None

    if spec.kind == "none" or (spec.rate == 0.0 and spec.kind != "beta_mixture"):
        observed, mask = labels.copy(), np.zeros(len(labels), dtype=bool)
    elif spec.kind == "symmetric":
        observed, mask = corrupt_symmetric(
            labels, num_classes, spec.rate, spec.seed, spec.include_self_flip
        )
    elif spec.kind == "asymmetric_pair":
        pair_map = default_pair_map(num_classes) if spec.pair_map is None else spec.pair_map
        validate_pair_map(pair_map, num_classes)
        observed, mask = corrupt_asymmetric(labels, pair_map, spec.rate, spec.seed)
    elif spec.kind == "instance_dependent":
        if scorer_params is None:
            raise NoiseConfigError("Instance-dependent noise needs a fitted scoring model")
        observed, mask, effective_rate = corrupt_instance_dependent(
            features, labels, scorer_params, spec.rate, spec.seed
        )
    else:
        onehot = np.eye(num_classes)[labels]
        soft, mask = corrupt_beta_mixture(onehot, spec.rate, *spec.beta_params, spec.seed)
        observed = np.argmax(soft, axis=1)

    logger.info(
        f"Applied {spec.kind} noise at rate {spec.rate}: "
        f"{int(mask.sum())}/{len(labels)} samples corrupted"
    )
    return NoisyDataset(
        features=features,
        true_labels=labels,
        observed_labels=np.asarray(observed, dtype=np.int64),
        corrupted=np.asarray(mask, dtype=bool),
        class_count=num_classes,
        soft_labels=soft,
        effective_rate=effective_rate,
    )


def save_noisy_dataset(
    dataset: NoisyDataset, directory: str, spec: Optional[NoiseSpec] = None
) -> Path:
    """Write features.bin (<f8), dataset.json, labels.csv and optional soft_labels.bin."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)

    dataset.features.astype("<f8").tofile(out / FEATURES_FILE)
    if dataset.is_soft:
        dataset.soft_labels.astype("<f8").tofile(out / SOFT_LABELS_FILE)

    pd.DataFrame(
        {
            "index": np.arange(len(dataset)),
            "true_label": dataset.true_labels,
            "observed_label": dataset.observed_labels,
            "corrupted": dataset.corrupted.astype(int),
        }
    ).to_csv(out / LABELS_FILE, index=False, lineterminator="\n")

    sidecar = {
        "shape": list(dataset.features.shape),
        "dtype": "<f8",
        "class_count": int(dataset.class_count),
        "seed": None if spec is None else int(spec.seed),
        "spec": None if spec is None else spec.to_dict(),
        "soft_labels": dataset.is_soft,
        "effective_rate": dataset.effective_rate,
    }
    with open(out / SIDECAR_FILE, "w", encoding="utf-8", newline="\n") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")

    return out


def load_noisy_dataset(directory: str) -> NoisyDataset:
    src = Path(directory)
    sidecar_path = src / SIDECAR_FILE
    if not sidecar_path.exists():
        raise FileNotFoundError(f"Dataset sidecar not found: {sidecar_path}")
    with open(sidecar_path, "r", encoding="utf-8") as f:
        sidecar = json.load(f)

    shape = tuple(sidecar["shape"])
    features = np.fromfile(src / FEATURES_FILE, dtype="<f8")
    if features.size != int(np.prod(shape)):
        raise ValueError(
            f"{FEATURES_FILE} holds {features.size} values, sidecar shape {shape} needs {int(np.prod(shape))}"
        )
    features = features.reshape(shape).astype(np.float64)

    table = pd.read_csv(src / LABELS_FILE)
    soft = None
    if sidecar.get("soft_labels"):
        soft = np.fromfile(src / SOFT_LABELS_FILE, dtype="<f8")
        soft = soft.reshape(shape[0], sidecar["class_count"]).astype(np.float64)

    return NoisyDataset(
        features=features,
        true_labels=table["true_label"].to_numpy(dtype=np.int64),
        observed_labels=table["observed_label"].to_numpy(dtype=np.int64),
        corrupted=table["corrupted"].to_numpy().astype(bool),
        class_count=int(sidecar["class_count"]),
        soft_labels=soft,
        effective_rate=sidecar.get("effective_rate"),
    )
