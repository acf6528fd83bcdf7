"""Experiment Orchestrator - runs one (config, seed) training experiment end to end.

Epochs t < T_w train with the warm-up optimizer on the observed labels. From
T_w on the configured optimizer takes over; for NCSAM every mini-batch gets a
fresh flip plan that feeds the correction term. Every output byte of
metrics.csv is determined by (config, seed).
"""

import json
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from diagnostics import (
    DegenerateInputError,
    GaussianPacConfig,
    distortion_report,
    empirical_gradient_split,
    gaussian_kl,
    pac_penalty,
    parameter_deviation,
    sharpness_estimate,
    squared_norm,
)
from model.mlp import Batch, ParameterSet, accuracy, init_params
from noise.flip_simulator import build_flip_plan
from noise.injection import NoisyDataset, make_noisy_dataset
from optimizers import OptimizerConfig, SGDOptimizer, build_optimizer
from utils.config_loader import ExperimentConfig
from utils.datasets import DatasetSplit, load_dataset, make_batches
from utils.logger import Logger
from utils.schema import CSV_OPTIONS, FLIPS_COLUMNS, METRICS_COLUMNS, SCHEMA_VERSION, EpochMetrics

RUN_STREAMS = ("init", "noise", "shuffle", "flip", "scorer", "sharpness")

METRICS_FILE = "metrics.csv"
CONFIG_FILE = "config.json"
FLIPS_FILE = "flips.csv"
PARAMS_FILE = "final_params.bin"
PARAMS_SIDECAR = "final_params.json"


def seed_streams(seed: int) -> Dict[str, np.random.SeedSequence]:
    """Independent child seed sequences, one per source of randomness in a run."""
    children = np.random.SeedSequence(seed).spawn(len(RUN_STREAMS))
    return dict(zip(RUN_STREAMS, children))


def stream_seed(sequence: np.random.SeedSequence) -> int:
    return int(sequence.generate_state(1)[0])


def default_run_dir(cfg: ExperimentConfig, seed: int) -> Path:
    base = Path(cfg.experiment.output_dir) / cfg.experiment.name
    return base / f"seed_{seed}" if len(cfg.experiment.seeds) > 1 else base


def save_params(params: ParameterSet, run_dir: Path):
    """final_params.bin holds every entry flattened in entry order as <f8."""
    params.flatten().astype("<f8").tofile(run_dir / PARAMS_FILE)
    sidecar = {
        "dtype": "<f8",
        "entries": [{"name": n, "shape": list(s)} for n, s in zip(params.names, params.shapes)],
        "size": params.size,
    }
    with open(run_dir / PARAMS_SIDECAR, "w", encoding="utf-8", newline="\n") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")


def load_params(run_dir: str) -> ParameterSet:
    run_dir = Path(run_dir)
    with open(run_dir / PARAMS_SIDECAR, "r", encoding="utf-8") as f:
        sidecar = json.load(f)
    flat = np.fromfile(run_dir / PARAMS_FILE, dtype="<f8").astype(np.float64)
    if flat.size != sidecar["size"]:
        raise ValueError(f"{PARAMS_FILE} holds {flat.size} values, sidecar expects {sidecar['size']}")
    entries, offset = [], 0
    for entry in sidecar["entries"]:
        count = int(np.prod(entry["shape"]))
        entries.append((entry["name"], flat[offset:offset + count].reshape(entry["shape"])))
        offset += count
    return ParameterSet(entries)


class ExperimentOrchestrator:
    """Coordinates dataset preparation, noise injection, training and emission for one seed."""

    def __init__(self, cfg: ExperimentConfig, seed: int, run_dir: Optional[str] = None):
        """Initialize orchestrator.

        Args:
            cfg: Validated experiment configuration
            seed: Run seed; every random stream of the run derives from it
            run_dir: Output directory (defaults to <output_dir>/<name>[/seed_<n>])
        """
        self.cfg = cfg
        self.seed = seed
        self.run_dir = Path(run_dir) if run_dir else default_run_dir(cfg, seed)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.logger = Logger(
            str(self.run_dir / "logs"), level=cfg.logging.level, console=cfg.logging.console
        )
        self.streams = seed_streams(seed)
        self.flip_rows: List[Dict[str, Any]] = []

    def run(self) -> Path:
        """Execute the experiment and write its outputs.

        Returns:
            The run directory
        """
        cfg = self.cfg
        self.logger.log(
            "orchestrator",
            "start",
            {"seed": self.seed, "optimizer": cfg.optimizer_name, "run_dir": str(self.run_dir)},
        )

        try:
            data = load_dataset(cfg.dataset, self.seed)
            noisy = self._inject_noise(data)

            reference = None
            if cfg.experiment.reference_clean_run:
                self.logger.log("reference", "start", {})
                reference = self._train(data, noisy, clean_labels=True)["snapshots"]
                self.logger.log("reference", "complete", {"epochs": len(reference)})

            self.logger.log(cfg.optimizer_name, "train_start", {"epochs": cfg.experiment.epochs})
            result = self._train(data, noisy, reference=reference)
            self.logger.log(cfg.optimizer_name, "train_complete", {"steps": result["steps"]})

            self._write_outputs(result, noisy)
            self.logger.log("orchestrator", "complete", {"run_dir": str(self.run_dir)})
            return self.run_dir

        except Exception as e:
            self.logger.log_error("orchestrator", e, {"seed": self.seed})
            raise

    def _inject_noise(self, data: DatasetSplit) -> NoisyDataset:
        cfg = self.cfg
        spec = cfg.noise.to_spec(stream_seed(self.streams["noise"]))
        scorer = None
        if spec.kind == "instance_dependent" and spec.rate > 0:
            scorer = self._fit_scorer(data)

        noisy = make_noisy_dataset(
            data.train_features, data.train_labels, spec, data.num_classes, scorer_params=scorer
        )
        self.logger.log_decision(
            "noise",
            f"Injected {spec.kind} noise",
            f"Requested rate {spec.rate}",
            inputs={"kind": spec.kind, "rate": spec.rate, "seed": spec.seed},
            outputs={
                "corrupted": int(noisy.corrupted.sum()),
                "corrupted_fraction": noisy.corrupted_fraction,
                "effective_rate": noisy.effective_rate,
            },
        )
        if noisy.effective_rate is not None and noisy.effective_rate < spec.rate - 1e-12:
            self.logger.log_warning(
                "noise",
                "Instance-dependent rate clamped",
                {"requested": spec.rate, "effective_rate": noisy.effective_rate},
            )
        return noisy

    def _fit_scorer(self, data: DatasetSplit) -> ParameterSet:
        """Short SGD fit on clean labels; its uncertainty drives instance-dependent flips."""
        cfg = self.cfg
        rng = np.random.default_rng(self.streams["scorer"])
        spec = cfg.model.to_spec(data.input_dim, data.num_classes, init_seed=int(rng.integers(2**32)))
        scorer_optimizer = SGDOptimizer(
            OptimizerConfig(
                learning_rate=cfg.optimizer.learning_rate,
                momentum=cfg.optimizer.momentum,
                weight_decay=cfg.optimizer.weight_decay,
            )
        )
        params = init_params(spec)
        n = len(data.train_labels)
        for _ in range(cfg.noise.scorer_epochs):
            for rows in make_batches(n, cfg.experiment.batch_size, rng):
                batch = Batch(data.train_features[rows], data.train_labels[rows], rows)
                params = scorer_optimizer.step(params, batch)

        scorer_acc = accuracy(params, data.train_features, data.train_labels)
        self.logger.log_metric("scorer", "train_acc", scorer_acc, epoch=cfg.noise.scorer_epochs)
        return params

    def _train(
        self,
        data: DatasetSplit,
        noisy: NoisyDataset,
        clean_labels: bool = False,
        reference: Optional[List[ParameterSet]] = None,
    ) -> Dict[str, Any]:
        """The warm-up then main-phase loop.

        With clean_labels=True the loop trains the clean-label twin and only
        records per-epoch parameter snapshots.
        """
        cfg = self.cfg
        opt_cfg = cfg.optimizer
        features = noisy.features
        labels = noisy.true_labels if clean_labels else noisy.observed_labels
        targets = None if clean_labels or not noisy.is_soft else noisy.soft_labels
        n = len(labels)

        spec = cfg.model.to_spec(data.input_dim, data.num_classes, stream_seed(self.streams["init"]))
        params = init_params(spec)
        main = build_optimizer(cfg.optimizer_name, opt_cfg)
        warmup = build_optimizer(opt_cfg.warmup_optimizer, opt_cfg)
        shuffle_rng = np.random.default_rng(self.streams["shuffle"])
        flip_rng = np.random.default_rng(self.streams["flip"])
        sharpness_rng = np.random.default_rng(self.streams["sharpness"])
        pac_cfg = GaussianPacConfig(
            prior_std=cfg.diagnostics.prior_std,
            posterior_std=cfg.diagnostics.posterior_std,
            perturbation_std=cfg.diagnostics.perturbation_std,
            sample_count=max(n, 2),
            param_dim=spec.param_count,
        )
        builds_plans = cfg.optimizer_name == "ncsam"
        record = not clean_labels
        log_flips = record and cfg.experiment.log_flips

        rows: List[Dict[str, Any]] = []
        snapshots: List[ParameterSet] = []
        steps = 0
        epochs = tqdm(
            range(cfg.experiment.epochs),
            desc=f"{cfg.experiment.name}[{cfg.optimizer_name}, seed {self.seed}]",
            disable=not (record and cfg.experiment.show_progress),
            leave=False,
        )
        for epoch in epochs:
            started = time.perf_counter()
            in_warmup = epoch < opt_cfg.warmup_epochs
            if epoch == opt_cfg.warmup_epochs and epoch > 0:
                # momentum carries over the phase switch
                main.state.momentum_buffers = warmup.state.momentum_buffers
                if record:
                    self.logger.log_decision(
                        cfg.optimizer_name,
                        f"Switch from {opt_cfg.warmup_optimizer} warm-up to {cfg.optimizer_name}",
                        f"Warm-up of {opt_cfg.warmup_epochs} epochs finished",
                        outputs={"epoch": epoch},
                    )

            active = warmup if in_warmup else main
            learning_rate = cfg.lr_schedule.learning_rate(opt_cfg.learning_rate, epoch)
            main.begin_epoch(epoch)
            if active is not main:
                active.begin_epoch(epoch)
            active.set_learning_rate(learning_rate)

            loss_sum = perturbation_sum = correction_sum = 0.0
            batches = make_batches(n, cfg.experiment.batch_size, shuffle_rng)
            for batch_number, batch_rows in enumerate(batches):
                batch = Batch(
                    features[batch_rows],
                    labels[batch_rows],
                    batch_rows,
                    targets=None if targets is None else targets[batch_rows],
                )
                plan = None
                if builds_plans and not in_warmup:
                    plan = build_flip_plan(params, batch, opt_cfg.flip_ratio, flip_rng)
                    if log_flips:
                        self.flip_rows.extend(plan.rows(epoch, batch_number))

                params = active.step(params, batch, plan)
                steps += 1
                loss_sum += active.state.last_loss * len(batch)
                perturbation_sum += active.state.perturbation_norm
                correction_sum += active.state.correction_norm

            elapsed = time.perf_counter() - started
            if not record:
                snapshots.append(params)
                continue

            scale = main.state.schedule.scale if cfg.optimizer_name == "ncsam" else 0.0
            metrics = self._epoch_metrics(
                epoch=epoch,
                params=params,
                data=data,
                noisy=noisy,
                labels=labels,
                targets=targets,
                pac_cfg=pac_cfg,
                train_loss=loss_sum / n,
                schedule_scale=scale,
                mean_perturbation_norm=perturbation_sum / len(batches),
                mean_correction_norm=correction_sum / len(batches),
                elapsed=elapsed,
            )
            rows.append(metrics.to_row())
            self.logger.log(cfg.optimizer_name, "epoch", {**metrics.to_row(), "learning_rate": learning_rate})
            self.logger.log_metric(cfg.optimizer_name, "epoch_seconds", elapsed, unit="s", epoch=epoch)
            epochs.set_postfix(loss=f"{metrics.train_loss:.3f}", test_acc=f"{metrics.test_acc:.3f}")

            if reference is not None:
                self.logger.log_metric(
                    "reference",
                    "parameter_deviation",
                    parameter_deviation(params, reference[epoch]),
                    epoch=epoch,
                )
            if cfg.diagnostics.sharpness_trials > 0:
                first = make_batches(n, cfg.experiment.batch_size)[0]
                first_batch = Batch(features[first], labels[first], first)
                self.logger.log_metric(
                    "diagnostics",
                    "sharpness",
                    sharpness_estimate(
                        params,
                        first_batch,
                        opt_cfg.sam_radius,
                        cfg.diagnostics.sharpness_trials,
                        sharpness_rng,
                    ),
                    epoch=epoch,
                )

        return {"params": params, "rows": rows, "snapshots": snapshots, "steps": steps}

    def _epoch_metrics(
        self,
        epoch: int,
        params: ParameterSet,
        data: DatasetSplit,
        noisy: NoisyDataset,
        labels: np.ndarray,
        targets: Optional[np.ndarray],
        pac_cfg: GaussianPacConfig,
        train_loss: float,
        schedule_scale: float,
        mean_perturbation_norm: float,
        mean_correction_norm: float,
        elapsed: float,
    ) -> EpochMetrics:
        cfg = self.cfg
        features = noisy.features
        corrupted = noisy.corrupted
        clean = ~corrupted

        cos_values, inner_products = [], []
        fixed_batches = make_batches(len(labels), cfg.experiment.batch_size)
        for batch_rows in fixed_batches[: cfg.diagnostics.max_batches]:
            batch = Batch(
                features[batch_rows],
                labels[batch_rows],
                batch_rows,
                targets=None if targets is None else targets[batch_rows],
            )
            split = empirical_gradient_split(params, batch, corrupted[batch_rows])
            try:
                report = distortion_report(split.clean, split.noise)
            except DegenerateInputError:
                continue
            cos_values.append(report.cos_theta)
            inner_products.append(report.inner_product)
        if inner_products:
            self.logger.log_metric(
                "diagnostics", "mean_inner_product", float(np.mean(inner_products)), epoch=epoch
            )

        weight_sq_norm = squared_norm(params)
        return EpochMetrics(
            epoch=epoch,
            train_loss=float(train_loss),
            train_acc=accuracy(params, features, labels),
            test_acc=accuracy(params, data.test_features, data.test_labels),
            clean_subset_acc=accuracy(params, features[clean], noisy.true_labels[clean]),
            noisy_subset_acc=accuracy(params, features[corrupted], noisy.true_labels[corrupted]),
            noisy_subset_fit=accuracy(params, features[corrupted], noisy.observed_labels[corrupted]),
            schedule_scale=float(schedule_scale),
            mean_perturbation_norm=float(mean_perturbation_norm),
            mean_correction_norm=float(mean_correction_norm),
            mean_cos_theta=float(np.mean(cos_values)) if cos_values else float("nan"),
            kl_diag=gaussian_kl(weight_sq_norm, pac_cfg),
            pac_penalty=pac_penalty(weight_sq_norm, pac_cfg),
            wall_seconds=float(elapsed) if cfg.experiment.record_wall_time else 0.0,
        )

    def _write_outputs(self, result: Dict[str, Any], noisy: NoisyDataset):
        cfg = self.cfg
        pd.DataFrame(result["rows"], columns=METRICS_COLUMNS).to_csv(
            self.run_dir / METRICS_FILE, **CSV_OPTIONS
        )

        echo = {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "config": cfg.to_dict(),
            "noise_summary": {
                "corrupted": int(noisy.corrupted.sum()),
                "corrupted_fraction": noisy.corrupted_fraction,
                "effective_rate": noisy.effective_rate,
            },
        }
        with open(self.run_dir / CONFIG_FILE, "w", encoding="utf-8", newline="\n") as f:
            json.dump(echo, f, indent=2, sort_keys=True)
            f.write("\n")

        save_params(result["params"], self.run_dir)

        if cfg.experiment.log_flips:
            pd.DataFrame(self.flip_rows, columns=FLIPS_COLUMNS).to_csv(
                self.run_dir / FLIPS_FILE, **CSV_OPTIONS
            )

        self.logger.log(
            "orchestrator",
            "outputs_written",
            {"files": sorted(p.name for p in self.run_dir.iterdir() if p.is_file())},
        )


def run_experiment(cfg: ExperimentConfig, seed: Optional[int] = None, run_dir: Optional[str] = None) -> Path:
    """Run one experiment; `seed` defaults to the first configured seed."""
    seed = cfg.experiment.seeds[0] if seed is None else seed
    return ExperimentOrchestrator(cfg, seed, run_dir).run()


def run_all_seeds(cfg: ExperimentConfig) -> List[Path]:
    """One run per configured seed, in seed order."""
    return [run_experiment(cfg, seed) for seed in cfg.experiment.seeds]
