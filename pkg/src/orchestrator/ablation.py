"""Ablation grids over flip ratio, compensation cap and schedule shape."""

from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union
import logging
import os

import numpy as np
import pandas as pd

from optimizers.base_optimizer import SCHEDULE_MODES
from utils.config_loader import ConfigError, ExperimentConfig
from utils.data_validation import MetricsValidator
from utils.schema import CSV_OPTIONS, SUMMARY_COLUMNS
from .orchestrator import run_experiment

logger = logging.getLogger(__name__)

ABLATION_AXES = ("flip_ratio", "kappa", "schedule_mode")
FINAL_WINDOW = 5
THREADS_ENV = "FLATGRAD_THREADS"
SUMMARY_FILE = "summary.csv"

AxisValue = Union[float, str]


def parse_axis_values(axis: str, text: str) -> List[AxisValue]:
    """'0.2,0.3' -> [0.2, 0.3] for numeric axes; names for schedule_mode."""
    if axis not in ABLATION_AXES:
        raise ConfigError([f"Unknown ablation axis '{axis}', expected one of {list(ABLATION_AXES)}"])
    items = [item.strip() for item in text.split(",") if item.strip()]
    if not items:
        raise ConfigError([f"No values given for axis '{axis}'"])
    if axis == "schedule_mode":
        bad = [v for v in items if v not in SCHEDULE_MODES]
        if bad:
            raise ConfigError([f"schedule_mode values must be in {list(SCHEDULE_MODES)}, got {bad}"])
        return items
    try:
        return [float(v) for v in items]
    except ValueError as e:
        raise ConfigError([f"Values for axis '{axis}' must be numbers: {e}"]) from e


def max_workers() -> int:
    """FLATGRAD_THREADS if set, else the number of logical cores."""
    value = os.getenv(THREADS_ENV)
    if value:
        try:
            return max(int(value), 1)
        except ValueError:
            logger.warning(f"Ignoring non-integer {THREADS_ENV}={value!r}")
    return os.cpu_count() or 1


def config_for_value(base_cfg: ExperimentConfig, axis: str, value: AxisValue) -> ExperimentConfig:
    """Base config with the axis set to `value`; progress bars off for grid runs."""
    try:
        cfg = base_cfg.with_updates(**{axis: value})
    except ValueError as e:
        raise ConfigError([f"{axis}={value!r}: {e}"]) from e
    return replace(cfg, experiment=replace(cfg.experiment, show_progress=False))


def final_window_mean(run_dir: Path, window: int = FINAL_WINDOW) -> float:
    """Mean test accuracy over the last `window` epochs of a run."""
    metrics = MetricsValidator.load_metrics(str(run_dir))
    return float(metrics["test_acc"].tail(window).mean())


def _run_cell(job: Tuple[int, ExperimentConfig, int, str]) -> Tuple[int, int, float]:
    value_index, cfg, seed, run_dir = job
    path = run_experiment(cfg, seed, run_dir)
    return value_index, seed, final_window_mean(path)


def run_ablation_grid(
    base_cfg: ExperimentConfig,
    axis: str,
    values: Sequence[AxisValue],
    out_dir: Optional[str] = None,
    workers: Optional[int] = None,
) -> Path:
    """One run per (value, seed) and a summary.csv of final-5-epoch test accuracy.

    Args:
        base_cfg: Validated base configuration
        axis: One of flip_ratio, kappa, schedule_mode
        values: Axis values, in summary row order
        out_dir: Grid directory (defaults to <output_dir>/<name>_ablation_<axis>)
        workers: Parallel processes (defaults to FLATGRAD_THREADS or the core count)

    Returns:
        Path to summary.csv
    """
    if axis not in ABLATION_AXES:
        raise ConfigError([f"Unknown ablation axis '{axis}', expected one of {list(ABLATION_AXES)}"])
    if not values:
        raise ConfigError(["Ablation needs at least one axis value"])

    grid_dir = Path(out_dir) if out_dir else (
        Path(base_cfg.experiment.output_dir) / f"{base_cfg.experiment.name}_ablation_{axis}"
    )
    jobs = []
    for index, value in enumerate(values):
        cfg = config_for_value(base_cfg, axis, value)
        for seed in cfg.experiment.seeds:
            run_dir = grid_dir / f"{axis}_{value}" / f"seed_{seed}"
            jobs.append((index, cfg, seed, str(run_dir)))

    workers = max_workers() if workers is None else max(int(workers), 1)
    workers = min(workers, len(jobs))
    logger.info(f"Ablation over {axis}: {len(values)} values, {len(jobs)} runs, {workers} worker(s)")

    scores = {index: {} for index in range(len(values))}
    if workers == 1:
        for job in jobs:
            index, seed, score = _run_cell(job)
            scores[index][seed] = score
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(_run_cell, job): job for job in jobs}
            for future in as_completed(futures):
                index, seed, score = future.result()
                scores[index][seed] = score

    rows = []
    for index, value in enumerate(values):
        per_seed = np.array([scores[index][seed] for seed in sorted(scores[index])])
        rows.append(
            {
                "axis_value": value,
                "mean": float(per_seed.mean()),
                "std": float(per_seed.std(ddof=0)),
                "n_seeds": int(per_seed.size),
            }
        )

    grid_dir.mkdir(parents=True, exist_ok=True)
    summary_path = grid_dir / SUMMARY_FILE
    pd.DataFrame(rows, columns=SUMMARY_COLUMNS).to_csv(summary_path, **CSV_OPTIONS)
    logger.info(f"Ablation summary written to {summary_path}")
    return summary_path
