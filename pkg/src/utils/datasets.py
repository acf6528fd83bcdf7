"""Desk-scale datasets: synthetic generators, IDX files, splits and batching."""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple
import logging

import numpy as np

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
IDX_IMAGES_HEADER = 16
IDX_LABELS_HEADER = 8
IDX_MAX_LABEL = 9


class IdxParseError(ValueError):
    """Malformed IDX file. `offset` is the byte position where parsing failed."""

    def __init__(self, message: str, offset: int, path: Optional[str] = None):
        self.offset = offset
        self.path = path
        where = f"{path} " if path else ""
        super().__init__(f"{where}at byte offset {offset}: {message}")


@dataclass
class DatasetSplit:
    train_features: np.ndarray
    train_labels: np.ndarray
    test_features: np.ndarray
    test_labels: np.ndarray
    num_classes: int

    @property
    def input_dim(self) -> int:
        return self.train_features.shape[1]


def _balanced_labels(n: int, num_classes: int, rng: np.random.Generator) -> np.ndarray:
    """Class counts differ by at most one."""
    return rng.permutation(np.arange(n) % num_classes)


def generate_two_moons(n: int, noise_std: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Two interleaving half circles; class 0 is the upper moon."""
    if n < 2:
        raise ValueError(f"two_moons needs n >= 2, got {n}")
    if noise_std < 0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std}")
    rng = np.random.default_rng(seed)

    n_upper = n - n // 2
    n_lower = n // 2
    t_upper = np.linspace(0.0, np.pi, n_upper)
    t_lower = np.linspace(0.0, np.pi, n_lower)
    upper = np.column_stack([np.cos(t_upper), np.sin(t_upper)])
    lower = np.column_stack([1.0 - np.cos(t_lower), 0.5 - np.sin(t_lower)])

    features = np.vstack([upper, lower])
    labels = np.concatenate([np.zeros(n_upper, dtype=np.int64), np.ones(n_lower, dtype=np.int64)])
    if noise_std > 0:
        features = features + rng.normal(0.0, noise_std, size=features.shape)

    order = rng.permutation(n)
    return features[order], labels[order]


def generate_gaussian_blobs(
    n: int, dim: int, num_classes: int, separation: float, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Unit-variance isotropic blobs whose centres are `separation` apart.

    With num_classes <= dim the centres sit on scaled coordinate axes, so every
    pair is exactly `separation` apart; otherwise they lie on random directions.
    """
    if num_classes < 2 or n < num_classes:
        raise ValueError(f"Blobs need n >= num_classes >= 2, got n={n}, num_classes={num_classes}")
    if dim < 1:
        raise ValueError(f"Blobs need dim >= 1, got {dim}")
    if separation < 0:
        raise ValueError(f"separation must be >= 0, got {separation}")
    rng = np.random.default_rng(seed)

    radius = separation / np.sqrt(2.0)
    if num_classes <= dim:
        centres = radius * np.eye(num_classes, dim)
    else:
        directions = rng.standard_normal((num_classes, dim))
        centres = radius * directions / np.linalg.norm(directions, axis=1, keepdims=True)

    labels = _balanced_labels(n, num_classes, rng)
    features = centres[labels] + rng.standard_normal((n, dim))
    return features, labels.astype(np.int64)


def stratified_split(
    labels: np.ndarray, test_fraction: float, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Sorted (train_rows, test_rows) with each class split in the same proportion."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)

    train_rows, test_rows = [], []
    for cls in np.unique(labels):
        rows = rng.permutation(np.flatnonzero(labels == cls))
        n_test = int(round(test_fraction * rows.size))
        test_rows.append(rows[:n_test])
        train_rows.append(rows[n_test:])
    return np.sort(np.concatenate(train_rows)), np.sort(np.concatenate(test_rows))


def _read_be_uint32(data: bytes, offset: int, path: str) -> int:
    if len(data) < offset + 4:
        raise IdxParseError("file truncated inside the header", len(data), path)
    return int(np.frombuffer(data, dtype=">u4", count=1, offset=offset)[0])


def _read_idx_images(path: str) -> np.ndarray:
    data = Path(path).read_bytes()
    magic = _read_be_uint32(data, 0, path)
    if magic != IDX_IMAGES_MAGIC:
        raise IdxParseError(f"bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}", 0, path)
    count = _read_be_uint32(data, 4, path)
    rows = _read_be_uint32(data, 8, path)
    cols = _read_be_uint32(data, 12, path)

    expected = IDX_IMAGES_HEADER + count * rows * cols
    if len(data) < expected:
        raise IdxParseError(
            f"file truncated: {count} images of {rows}x{cols} need {expected} bytes, found {len(data)}",
            len(data),
            path,
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=IDX_IMAGES_HEADER)
    return pixels.reshape(count, rows * cols).astype(np.float64) / 255.0


def _read_idx_labels(path: str) -> np.ndarray:
    data = Path(path).read_bytes()
    magic = _read_be_uint32(data, 0, path)
    if magic != IDX_LABELS_MAGIC:
        raise IdxParseError(f"bad label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}", 0, path)
    count = _read_be_uint32(data, 4, path)

    expected = IDX_LABELS_HEADER + count
    if len(data) < expected:
        raise IdxParseError(
            f"file truncated: {count} labels need {expected} bytes, found {len(data)}", len(data), path
        )
    labels = np.frombuffer(data, dtype=np.uint8, count=count, offset=IDX_LABELS_HEADER).astype(np.int64)
    bad = np.flatnonzero(labels > IDX_MAX_LABEL)
    if bad.size:
        raise IdxParseError(
            f"label {labels[bad[0]]} outside [0, {IDX_MAX_LABEL}]", IDX_LABELS_HEADER + int(bad[0]), path
        )
    return labels


def load_idx(images_path: str, labels_path: str) -> Tuple[np.ndarray, np.ndarray]:
    """Read an IDX image/label file pair.

    Returns:
        (features [N x rows*cols] scaled to [0, 1], labels [N])

    Raises:
        FileNotFoundError: If either file is missing
        IdxParseError: On bad magic, truncation or an image/label count mismatch
    """
    for path in (images_path, labels_path):
        if not Path(path).exists():
            raise FileNotFoundError(f"IDX file not found: {path}")

    features = _read_idx_images(images_path)
    labels = _read_idx_labels(labels_path)
    if features.shape[0] != labels.shape[0]:
        raise IdxParseError(
            f"image/label count mismatch: {features.shape[0]} images vs {labels.shape[0]} labels",
            4,
            labels_path,
        )
    return features, labels


def make_batches(
    num_rows: int, batch_size: int, rng: Optional[np.random.Generator] = None
) -> List[np.ndarray]:
    """Row-index batches covering every row once; shuffled when `rng` is given.

    The last batch may be smaller than batch_size.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(num_rows) if rng is None else rng.permutation(num_rows)
    return [order[start:start + batch_size] for start in range(0, num_rows, batch_size)]


def load_dataset(cfg, seed: int) -> DatasetSplit:
    """Build the train/test split described by a DatasetConfig.

    Synthetic data and the 80/20 stratified split are drawn from `cfg.seed`
    when set, otherwise from the run seed.
    """
    data_seed = seed if cfg.seed is None else cfg.seed
    generator_seed, split_seed = np.random.SeedSequence(data_seed).generate_state(2)

    if cfg.kind == "idx_files":
        train_x, train_y = load_idx(cfg.train_images, cfg.train_labels)
        if cfg.test_images and cfg.test_labels:
            test_x, test_y = load_idx(cfg.test_images, cfg.test_labels)
            num_classes = int(max(train_y.max(), test_y.max())) + 1
            return DatasetSplit(train_x, train_y, test_x, test_y, max(num_classes, 2))
        features, labels = train_x, train_y
        num_classes = max(int(labels.max()) + 1, 2)
    elif cfg.kind == "two_moons":
        features, labels = generate_two_moons(cfg.n_samples, cfg.noise_std, int(generator_seed))
        num_classes = 2
    else:
        features, labels = generate_gaussian_blobs(
            cfg.n_samples, cfg.n_features, cfg.n_classes, cfg.separation, int(generator_seed)
        )
        num_classes = cfg.n_classes

    train_rows, test_rows = stratified_split(labels, cfg.test_fraction, int(split_seed))
    logger.info(
        f"Dataset {cfg.kind}: {train_rows.size} train / {test_rows.size} test rows, "
        f"{features.shape[1]} features, {num_classes} classes"
    )
    return DatasetSplit(
        features[train_rows], labels[train_rows], features[test_rows], labels[test_rows], num_classes
    )
