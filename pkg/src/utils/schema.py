"""Schema definitions for the run outputs (metrics.csv, flips.csv, summary.csv)."""

from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List

# Schema version, bumped whenever a column is added, removed or reordered
SCHEMA_VERSION = "1.1.0"


@dataclass
class EpochMetrics:
    """One metrics.csv row. Field order is the column order."""

    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float
    clean_subset_acc: float
    noisy_subset_acc: float
    noisy_subset_fit: float
    schedule_scale: float
    mean_perturbation_norm: float
    mean_correction_norm: float
    mean_cos_theta: float
    kl_diag: float
    pac_penalty: float
    wall_seconds: float

    def to_row(self) -> Dict[str, Any]:
        return asdict(self)


METRICS_COLUMNS: List[str] = [f.name for f in fields(EpochMetrics)]
ACCURACY_COLUMNS = [
    "train_acc",
    "test_acc",
    "clean_subset_acc",
    "noisy_subset_acc",
    "noisy_subset_fit",
]
FLIPS_COLUMNS = ["epoch", "batch", "sample_index", "gap", "flipped_label"]
SUMMARY_COLUMNS = ["axis_value", "mean", "std", "n_seeds"]

# Plots drawn by emit_plots: file name -> (column, y-axis label)
PLOT_SERIES = {
    "test_acc.svg": ("test_acc", "test accuracy"),
    "schedule_scale.svg": ("schedule_scale", "s(t)"),
    "cos_theta.svg": ("mean_cos_theta", "mean cos θ"),
}

# Fixed CSV dialect for byte-reproducible files
CSV_OPTIONS = {"index": False, "lineterminator": "\n", "encoding": "utf-8", "na_rep": "nan"}
