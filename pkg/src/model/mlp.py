"""Feedforward ReLU classifier with exact analytic gradients.

Parameters and gradients are stored as ordered, named float64 arrays. The
entry order (layer order, weight before bias) is fixed so that norms and
inner products are reproducible bit for bit.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy.special import logsumexp, softmax

logger = logging.getLogger(__name__)

SUPPORTED_ACTIVATIONS = ("relu",)


class ShapeMismatchError(ValueError):
    """Raised when tensors or parameter sets have incompatible shapes."""


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of the classifier: input dim, hidden widths..., class count."""

    layer_widths: Tuple[int, ...]
    activation: str = "relu"
    init_seed: int = 0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ValueError("MlpSpec needs at least an input and an output width")
        if any(w < 1 for w in widths):
            raise ValueError(f"Layer widths must be positive: {widths}")
        if widths[-1] < 2:
            raise ValueError(f"Class count must be >= 2, got {widths[-1]}")
        if self.activation not in SUPPORTED_ACTIVATIONS:
            raise ValueError(f"Unsupported activation: {self.activation}")

    @property
    def num_classes(self) -> int:
        return self.layer_widths[-1]

    @property
    def param_count(self) -> int:
        return sum(
            fan_in * fan_out + fan_out
            for fan_in, fan_out in zip(self.layer_widths[:-1], self.layer_widths[1:])
        )


class ParameterSet:
    """Ordered collection of named float64 tensors with value semantics.

    Every arithmetic method returns a new object; the stored arrays are never
    written to after construction.
    """

    def __init__(self, entries: Sequence[Tuple[str, np.ndarray]]):
        names = [name for name, _ in entries]
        if len(set(names)) != len(names):
            raise ValueError(f"Duplicate entry names: {names}")
        self._entries: List[Tuple[str, np.ndarray]] = [
            (name, np.array(tensor, dtype=np.float64, order="C"))
            for name, tensor in entries
        ]

    # -- structure -----------------------------------------------------------

    @property
    def names(self) -> List[str]:
        return [name for name, _ in self._entries]

    @property
    def shapes(self) -> List[Tuple[int, ...]]:
        return [tensor.shape for _, tensor in self._entries]

    @property
    def size(self) -> int:
        """Total number of scalar parameters (k)."""
        return int(sum(tensor.size for _, tensor in self._entries))

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self._entries)

    def tensors(self) -> List[np.ndarray]:
        return [tensor for _, tensor in self._entries]

    def __getitem__(self, name: str) -> np.ndarray:
        for entry_name, tensor in self._entries:
            if entry_name == name:
                return tensor
        raise KeyError(name)

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        layout = ", ".join(f"{n}{tuple(t.shape)}" for n, t in self._entries)
        return f"{type(self).__name__}({layout})"

    def check_congruent(self, other: "ParameterSet"):
        if self.names != other.names or self.shapes != other.shapes:
            raise ShapeMismatchError(
                f"Incongruent parameter sets: {list(zip(self.names, self.shapes))} "
                f"vs {list(zip(other.names, other.shapes))}"
            )

    # -- construction helpers --------------------------------------------------

    def _rebuild(self, tensors: Sequence[np.ndarray]) -> "ParameterSet":
        return type(self)(list(zip(self.names, tensors)))

    def zeros_like(self) -> "ParameterSet":
        return self._rebuild([np.zeros_like(t) for t in self.tensors()])

    def as_gradient(self) -> "GradientSet":
        return GradientSet(list(self._entries))

    def as_parameters(self) -> "ParameterSet":
        return ParameterSet(list(self._entries))

    def flatten(self) -> np.ndarray:
        """Concatenation of all entries in fixed entry order."""
        if not self._entries:
            return np.zeros(0)
        return np.concatenate([t.ravel() for t in self.tensors()])

    def unflatten(self, flat: np.ndarray) -> "ParameterSet":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.size,):
            raise ShapeMismatchError(
                f"Flat vector of shape {flat.shape} does not match size {self.size}"
            )
        tensors, offset = [], 0
        for shape in self.shapes:
            count = int(np.prod(shape))
            tensors.append(flat[offset : offset + count].reshape(shape))
            offset += count
        return self._rebuild(tensors)

    # -- algebra -----------------------------------------------------------------

    def add(self, other: "ParameterSet") -> "ParameterSet":
        self.check_congruent(other)
        return self._rebuild([a + b for a, b in zip(self.tensors(), other.tensors())])

    def scale(self, factor: float) -> "ParameterSet":
        return self._rebuild([factor * t for t in self.tensors()])

    def axpy(self, a: float, other: "ParameterSet") -> "ParameterSet":
        """self + a * other."""
        self.check_congruent(other)
        return self._rebuild(
            [x + a * v for x, v in zip(self.tensors(), other.tensors())]
        )

    def dot(self, other: "ParameterSet") -> float:
        self.check_congruent(other)
        return float(np.dot(self.flatten(), other.flatten()))

    def l2_norm(self) -> float:
        flat = self.flatten()
        return float(np.sqrt(np.dot(flat, flat)))

    def allclose(self, other: "ParameterSet", atol: float = 1e-12) -> bool:
        self.check_congruent(other)
        return all(
            np.allclose(a, b, rtol=0.0, atol=atol)
            for a, b in zip(self.tensors(), other.tensors())
        )


class GradientSet(ParameterSet):
    """Same layout as ParameterSet; holds gradients, perturbations and corrections."""


@dataclass
class Batch:
    """A mini-batch. `targets` holds soft label rows when training on distributions."""

    features: np.ndarray
    labels: np.ndarray
    sample_indices: np.ndarray
    targets: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.sample_indices = np.asarray(self.sample_indices, dtype=np.int64)
        if self.features.ndim != 2:
            raise ShapeMismatchError(
                f"Batch features must be 2-D, got shape {self.features.shape}"
            )
        size = self.features.shape[0]
        if size < 1:
            raise ValueError("Batch must contain at least one sample")
        if self.labels.shape != (size,) or self.sample_indices.shape != (size,):
            raise ShapeMismatchError(
                f"Batch of {size} rows has labels {self.labels.shape} "
                f"and indices {self.sample_indices.shape}"
            )
        if self.targets is not None:
            self.targets = np.asarray(self.targets, dtype=np.float64)
            if self.targets.ndim != 2 or self.targets.shape[0] != size:
                raise ShapeMismatchError(
                    f"Soft targets of shape {self.targets.shape} do not match batch size {size}"
                )

    def __len__(self) -> int:
        return self.features.shape[0]

    def subset(self, rows: Sequence[int], labels: Optional[np.ndarray] = None) -> "Batch":
        """Rows of this batch, optionally relabelled with hard labels."""
        rows = np.asarray(rows, dtype=np.int64)
        use_hard = labels is not None
        return Batch(
            features=self.features[rows],
            labels=np.asarray(labels) if use_hard else self.labels[rows],
            sample_indices=self.sample_indices[rows],
            targets=None if use_hard or self.targets is None else self.targets[rows],
        )


LossFn = Callable[[ParameterSet, Batch], Tuple[float, GradientSet]]


def layer_names(index: int) -> Tuple[str, str]:
    return f"layer{index}.weight", f"layer{index}.bias"


def init_params(spec: MlpSpec) -> ParameterSet:
    """Glorot-uniform weights, zero biases, fully determined by spec.init_seed."""
    rng = np.random.default_rng(spec.init_seed)
    entries = []
    for index, (fan_in, fan_out) in enumerate(
        zip(spec.layer_widths[:-1], spec.layer_widths[1:])
    ):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weight_name, bias_name = layer_names(index)
        entries.append((weight_name, rng.uniform(-bound, bound, size=(fan_in, fan_out))))
        entries.append((bias_name, np.zeros(fan_out)))
    return ParameterSet(entries)


def _layers(params: ParameterSet) -> List[Tuple[np.ndarray, np.ndarray]]:
    tensors = params.tensors()
    if len(tensors) % 2 != 0 or not tensors:
        raise ShapeMismatchError(f"Expected (weight, bias) pairs, got {params!r}")
    layers = list(zip(tensors[0::2], tensors[1::2]))
    for index, (weight, bias) in enumerate(layers):
        if weight.ndim != 2 or bias.shape != (weight.shape[1],):
            raise ShapeMismatchError(
                f"Layer {index}: weight {weight.shape} and bias {bias.shape} are inconsistent"
            )
        if index > 0 and layers[index - 1][0].shape[1] != weight.shape[0]:
            raise ShapeMismatchError(
                f"Layer {index} expects {weight.shape[0]} inputs, "
                f"previous layer emits {layers[index - 1][0].shape[1]}"
            )
    return layers


def _forward_trace(
    params: ParameterSet, features: np.ndarray
) -> Tuple[np.ndarray, List[np.ndarray], List[np.ndarray]]:
    """Logits plus the layer inputs and pre-activations needed for backprop."""
    layers = _layers(params)
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != layers[0][0].shape[0]:
        raise ShapeMismatchError(
            f"Features of shape {features.shape} do not match input width "
            f"{layers[0][0].shape[0]}"
        )

    inputs, pre_activations = [], []
    hidden = features
    for index, (weight, bias) in enumerate(layers):
        inputs.append(hidden)
        z = hidden @ weight + bias
        pre_activations.append(z)
        hidden = np.maximum(z, 0.0) if index < len(layers) - 1 else z
    return hidden, inputs, pre_activations


def forward(params: ParameterSet, features: np.ndarray) -> np.ndarray:
    """Logits of shape (B, C)."""
    logits, _, _ = _forward_trace(params, features)
    return logits


def predict_proba(params: ParameterSet, features: np.ndarray) -> np.ndarray:
    return softmax(forward(params, features), axis=1)


def predict(params: ParameterSet, features: np.ndarray) -> np.ndarray:
    return np.argmax(forward(params, features), axis=1)


def _target_matrix(batch: Batch, num_classes: int) -> np.ndarray:
    if batch.targets is not None:
        if batch.targets.shape[1] != num_classes:
            raise ShapeMismatchError(
                f"Soft targets have {batch.targets.shape[1]} classes, model has {num_classes}"
            )
        return batch.targets
    if batch.labels.min() < 0 or batch.labels.max() >= num_classes:
        raise ValueError(
            f"Labels must lie in [0, {num_classes}), got range "
            f"[{batch.labels.min()}, {batch.labels.max()}]"
        )
    onehot = np.zeros((len(batch), num_classes))
    onehot[np.arange(len(batch)), batch.labels] = 1.0
    return onehot


def loss_and_grad(params: ParameterSet, batch: Batch) -> Tuple[float, GradientSet]:
    """Mean softmax cross-entropy and its exact gradient w.r.t. every entry."""
    logits, inputs, pre_activations = _forward_trace(params, batch.features)
    size, num_classes = logits.shape
    targets = _target_matrix(batch, num_classes)

    log_norm = logsumexp(logits, axis=1)
    loss = float(np.mean(log_norm - np.sum(targets * logits, axis=1)))

    # d loss / d logits for a target distribution summing to 1
    delta = (softmax(logits, axis=1) - targets) / size
    layers = _layers(params)
    grads: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
    for index in range(len(layers) - 1, -1, -1):
        grads[index] = (inputs[index].T @ delta, delta.sum(axis=0))
        if index > 0:
            # ReLU subgradient at 0 is 0
            delta = (delta @ layers[index][0].T) * (pre_activations[index - 1] > 0.0)

    entries = []
    for index in range(len(layers)):
        weight_name, bias_name = layer_names(index)
        entries.append((weight_name, grads[index][0]))
        entries.append((bias_name, grads[index][1]))
    return loss, GradientSet(_rename_like(params, entries))


def _rename_like(params: ParameterSet, entries):
    # keep the caller's entry names so gradients stay congruent with any naming
    return [(name, tensor) for name, (_, tensor) in zip(params.names, entries)]


def param_axpy(params: ParameterSet, a: float, v: ParameterSet) -> ParameterSet:
    """W + a * v as a fresh ParameterSet."""
    return params.axpy(a, v).as_parameters()


def grad_l2_norm(g: ParameterSet) -> float:
    return g.l2_norm()


def grad_dot(g1: ParameterSet, g2: ParameterSet) -> float:
    return g1.dot(g2)


def accuracy(params: ParameterSet, features: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose argmax logit equals the label; 0.0 for no rows."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0.0
    return float(np.mean(predict(params, features) == labels))
