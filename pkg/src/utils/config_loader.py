"""Configuration loader utility.

Configs are YAML (JSON documents are valid YAML and load the same way). A raw
config is merged over DEFAULT_CONFIG, checked for unknown keys and ranges, and
turned into a typed ExperimentConfig. Every problem found is reported in one
ConfigError.
"""

import copy
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from model.mlp import MlpSpec, SUPPORTED_ACTIVATIONS
from noise.injection import NOISE_KINDS, NoiseSpec
from optimizers.base_optimizer import OPTIMIZER_NAMES, SCHEDULE_MODES, OptimizerConfig

DATASET_KINDS = ("two_moons", "gaussian_blobs", "idx_files")
LR_SCHEDULE_KINDS = ("constant", "step_decay")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

DEFAULT_CONFIG: Dict[str, Any] = {
    "experiment": {
        "name": "ncsam_blobs",
        "epochs": 60,
        "batch_size": 128,
        "seeds": [0],
        "output_dir": "runs",
        "log_flips": False,
        "record_wall_time": False,
        "show_progress": True,
        "reference_clean_run": False,
    },
    "dataset": {
        "kind": "gaussian_blobs",
        "n_samples": 6250,
        "n_features": 20,
        "n_classes": 10,
        "separation": 4.0,
        "noise_std": 0.1,
        "test_fraction": 0.2,
        "seed": None,
        "train_images": None,
        "train_labels": None,
        "test_images": None,
        "test_labels": None,
    },
    "noise": {
        "kind": "symmetric",
        "rate": 0.4,
        "beta_params": [1.0, 1.0],
        "pair_map": None,
        "include_self_flip": False,
        "scorer_epochs": 5,
        "seed": None,
    },
    "model": {
        "hidden_widths": [64, 64],
        "activation": "relu",
    },
    "optimizer": {
        "name": "ncsam",
        "learning_rate": 0.05,
        "momentum": 0.9,
        "weight_decay": 5e-4,
        "sam_radius": 0.1,
        "kappa": 0.05,
        "warmup_epochs": None,
        "ramp_epochs": None,
        "flip_ratio": 0.4,
        "warmup_optimizer": "sgd",
        "normalize_noise_grad": True,
        "correction_sign": 1,
    },
    "lr_schedule": {
        "kind": "step_decay",
        "milestones": None,
        "factor": 0.1,
    },
    "schedule_mode": "progressive",
    "diagnostics": {
        "prior_std": 1.0,
        "posterior_std": 1.0,
        "perturbation_std": None,
        "sharpness_trials": 0,
        "max_batches": 4,
    },
    "logging": {
        "level": "INFO",
        "console": False,
    },
}


class ConfigError(ValueError):
    """Invalid configuration. `issues` lists every problem found."""

    def __init__(self, issues: List[str]):
        self.issues = list(issues)
        super().__init__("Invalid configuration:\n  - " + "\n  - ".join(self.issues))


@dataclass(frozen=True)
class ExperimentSection:
    name: str
    epochs: int
    batch_size: int
    seeds: Tuple[int, ...]
    output_dir: str
    log_flips: bool = False
    record_wall_time: bool = False
    show_progress: bool = True
    reference_clean_run: bool = False


@dataclass(frozen=True)
class DatasetConfig:
    kind: str
    n_samples: int = 0
    n_features: int = 2
    n_classes: int = 2
    separation: float = 4.0
    noise_std: float = 0.1
    test_fraction: float = 0.2
    seed: Optional[int] = None
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None


@dataclass(frozen=True)
class NoiseSection:
    kind: str
    rate: float
    beta_params: Tuple[float, float] = (1.0, 1.0)
    pair_map: Optional[Tuple[int, ...]] = None
    include_self_flip: bool = False
    scorer_epochs: int = 5
    seed: Optional[int] = None

    def to_spec(self, seed: int) -> NoiseSpec:
        return NoiseSpec(
            kind=self.kind,
            rate=self.rate,
            beta_params=self.beta_params,
            pair_map=self.pair_map,
            seed=seed if self.seed is None else self.seed,
            include_self_flip=self.include_self_flip,
        )


@dataclass(frozen=True)
class ModelConfig:
    hidden_widths: Tuple[int, ...] = (64, 64)
    activation: str = "relu"

    def to_spec(self, input_dim: int, num_classes: int, init_seed: int) -> MlpSpec:
        return MlpSpec(
            layer_widths=(input_dim, *self.hidden_widths, num_classes),
            activation=self.activation,
            init_seed=init_seed,
        )


@dataclass(frozen=True)
class LrScheduleConfig:
    kind: str = "constant"
    milestones: Tuple[int, ...] = ()
    factor: float = 0.1

    def learning_rate(self, base: float, epoch: int) -> float:
        if self.kind == "constant":
            return base
        passed = sum(1 for m in self.milestones if epoch >= m)
        return base * self.factor ** passed


@dataclass(frozen=True)
class DiagnosticsConfig:
    prior_std: float = 1.0
    posterior_std: float = 1.0
    perturbation_std: float = 0.0
    sharpness_trials: int = 0
    max_batches: int = 4


@dataclass(frozen=True)
class LoggingConfig:
    level: str = "INFO"
    console: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentSection
    dataset: DatasetConfig
    noise: NoiseSection
    model: ModelConfig
    optimizer_name: str
    optimizer: OptimizerConfig
    lr_schedule: LrScheduleConfig
    diagnostics: DiagnosticsConfig
    logging: LoggingConfig = field(default_factory=LoggingConfig)

    @property
    def schedule_mode(self) -> str:
        return self.optimizer.schedule_mode

    def to_dict(self) -> Dict[str, Any]:
        """Resolved config in the raw layout; validate_config(to_dict()) round-trips."""
        optimizer = asdict(self.optimizer)
        schedule_mode = optimizer.pop("schedule_mode")
        data = {
            "experiment": asdict(self.experiment),
            "dataset": asdict(self.dataset),
            "noise": asdict(self.noise),
            "model": asdict(self.model),
            "optimizer": {"name": self.optimizer_name, **optimizer},
            "lr_schedule": asdict(self.lr_schedule),
            "schedule_mode": schedule_mode,
            "diagnostics": asdict(self.diagnostics),
            "logging": asdict(self.logging),
        }
        return _lists_from_tuples(data)

    def with_updates(self, **optimizer_fields) -> "ExperimentConfig":
        """Copy with OptimizerConfig fields replaced (ablation axes)."""
        return replace(self, optimizer=replace(self.optimizer, **optimizer_fields))


def _lists_from_tuples(value):
    if isinstance(value, dict):
        return {k: _lists_from_tuples(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_lists_from_tuples(v) for v in value]
    return value


def load_config(config_path: str = "config/config.yaml") -> Dict[str, Any]:
    """Load a raw configuration dictionary from a YAML or JSON file.

    Args:
        config_path: Path to config file

    Returns:
        Configuration dictionary (not yet validated)
    """
    config_file = Path(config_path)

    if not config_file.exists():
        raise FileNotFoundError(f"Config file not found: {config_path}")

    with open(config_file, "r", encoding="utf-8") as f:
        try:
            config = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError([f"Cannot parse {config_path}: {e}"]) from e

    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ConfigError([f"{config_path} must contain a mapping at the top level"])
    return config


def apply_overrides(
    raw: Dict[str, Any],
    seed: Optional[int] = None,
    out: Optional[str] = None,
    optimizer: Optional[str] = None,
    log_flips: Optional[bool] = None,
) -> Dict[str, Any]:
    """Return a copy of `raw` with CLI overrides applied (before validation)."""
    updated = copy.deepcopy(raw)
    if seed is not None:
        updated.setdefault("experiment", {})["seeds"] = [seed]
    if out is not None:
        updated.setdefault("experiment", {})["output_dir"] = out
    if optimizer is not None:
        updated.setdefault("optimizer", {})["name"] = optimizer
    if log_flips:
        updated.setdefault("experiment", {})["log_flips"] = True
    return updated


def _merge(raw: Dict[str, Any], issues: List[str]) -> Dict[str, Any]:
    merged = copy.deepcopy(DEFAULT_CONFIG)
    for key, value in raw.items():
        if key not in DEFAULT_CONFIG:
            issues.append(f"Unknown config key: {key}")
            continue
        if isinstance(DEFAULT_CONFIG[key], dict):
            if not isinstance(value, dict):
                issues.append(f"Section '{key}' must be a mapping")
                continue
            for sub_key, sub_value in value.items():
                if sub_key not in DEFAULT_CONFIG[key]:
                    issues.append(f"Unknown config key: {key}.{sub_key}")
                else:
                    merged[key][sub_key] = sub_value
        else:
            merged[key] = value
    return merged


class _Checker:
    """Collects type/range problems instead of failing on the first one."""

    def __init__(self, issues: List[str]):
        self.issues = issues

    def integer(self, path: str, value, minimum: Optional[int] = None, allow_none: bool = False):
        if value is None and allow_none:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            self.issues.append(f"{path} must be an integer, got {value!r}")
            return None
        if minimum is not None and value < minimum:
            self.issues.append(f"{path} must be >= {minimum}, got {value}")
            return None
        return value

    def number(self, path: str, value, allow_none: bool = False):
        if value is None and allow_none:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.issues.append(f"{path} must be a number, got {value!r}")
            return None
        return float(value)

    def boolean(self, path: str, value):
        if not isinstance(value, bool):
            self.issues.append(f"{path} must be true or false, got {value!r}")
            return False
        return value

    def choice(self, path: str, value, choices):
        if value not in choices:
            self.issues.append(f"{path} must be one of {list(choices)}, got {value!r}")
            return None
        return value

    def int_list(self, path: str, value, minimum: Optional[int] = None, allow_empty: bool = True):
        if not isinstance(value, (list, tuple)) or (not allow_empty and not value):
            self.issues.append(f"{path} must be a{'' if allow_empty else ' non-empty'} list of integers")
            return None
        checked = [self.integer(f"{path}[{i}]", v, minimum) for i, v in enumerate(value)]
        return None if any(c is None for c in checked) else tuple(checked)


def _train_size(dataset: Dict[str, Any]) -> Optional[int]:
    """Exact train-set size of a synthetic dataset after the stratified split."""
    n, fraction = dataset["n_samples"], dataset["test_fraction"]
    if dataset["kind"] == "two_moons":
        counts = [n - n // 2, n // 2]
    elif dataset["kind"] == "gaussian_blobs":
        c = dataset["n_classes"]
        counts = [n // c + (1 if k < n % c else 0) for k in range(c)]
    else:
        return None
    return sum(count - int(round(fraction * count)) for count in counts)


def validate_config(raw: Dict[str, Any]) -> ExperimentConfig:
    """Validate a raw configuration and resolve derived defaults.

    Args:
        raw: Configuration dictionary as loaded by load_config

    Returns:
        Typed ExperimentConfig

    Raises:
        ConfigError: If any key is unknown or any value is invalid
    """
    issues: List[str] = []
    cfg = _merge(raw, issues)
    check = _Checker(issues)

    exp = cfg["experiment"]
    if not isinstance(exp["name"], str) or not exp["name"]:
        issues.append("experiment.name must be a non-empty string")
    epochs = check.integer("experiment.epochs", exp["epochs"], minimum=1)
    batch_size = check.integer("experiment.batch_size", exp["batch_size"], minimum=1)
    seeds = check.int_list("experiment.seeds", exp["seeds"], minimum=0, allow_empty=False)
    if seeds is not None and len(set(seeds)) != len(seeds):
        issues.append(f"experiment.seeds contains duplicates: {list(seeds)}")
    if not isinstance(exp["output_dir"], str) or not exp["output_dir"]:
        issues.append("experiment.output_dir must be a non-empty path string")
    flags = {
        key: check.boolean(f"experiment.{key}", exp[key])
        for key in ("log_flips", "record_wall_time", "show_progress", "reference_clean_run")
    }

    data = cfg["dataset"]
    kind = check.choice("dataset.kind", data["kind"], DATASET_KINDS)
    if kind in ("two_moons", "gaussian_blobs"):
        n_samples = check.integer("dataset.n_samples", data["n_samples"], minimum=2)
        if kind == "gaussian_blobs":
            n_features = check.integer("dataset.n_features", data["n_features"], minimum=1)
            n_classes = check.integer("dataset.n_classes", data["n_classes"], minimum=2)
            separation = check.number("dataset.separation", data["separation"])
            if separation is not None and separation < 0:
                issues.append(f"dataset.separation must be >= 0, got {separation}")
            if n_samples is not None and n_classes is not None and n_samples < n_classes:
                issues.append(f"dataset.n_samples ({n_samples}) must be >= n_classes ({n_classes})")
        else:
            noise_std = check.number("dataset.noise_std", data["noise_std"])
            if noise_std is not None and noise_std < 0:
                issues.append(f"dataset.noise_std must be >= 0, got {noise_std}")
    elif kind == "idx_files":
        for key in ("train_images", "train_labels"):
            if not data[key]:
                issues.append(f"dataset.{key} is required for idx_files")
        if bool(data["test_images"]) != bool(data["test_labels"]):
            issues.append("dataset.test_images and dataset.test_labels must be given together")
        for key in ("train_images", "train_labels", "test_images", "test_labels"):
            if data[key] and not Path(data[key]).exists():
                issues.append(f"dataset.{key} not found: {data[key]}")
    test_fraction = check.number("dataset.test_fraction", data["test_fraction"])
    if test_fraction is not None and not 0.0 < test_fraction < 1.0:
        issues.append(f"dataset.test_fraction must lie in (0, 1), got {test_fraction}")
    check.integer("dataset.seed", data["seed"], minimum=0, allow_none=True)

    noise = cfg["noise"]
    check.choice("noise.kind", noise["kind"], NOISE_KINDS)
    rate = check.number("noise.rate", noise["rate"])
    if rate is not None and not 0.0 <= rate <= 1.0:
        issues.append(f"noise.rate must lie in [0, 1], got {rate}")
    beta_params = noise["beta_params"]
    if (
        not isinstance(beta_params, (list, tuple))
        or len(beta_params) != 2
        or any(isinstance(b, bool) or not isinstance(b, (int, float)) or b <= 0 for b in beta_params)
    ):
        issues.append(f"noise.beta_params must be two positive numbers, got {beta_params!r}")
    if noise["pair_map"] is not None:
        check.int_list("noise.pair_map", noise["pair_map"], minimum=0, allow_empty=False)
    check.boolean("noise.include_self_flip", noise["include_self_flip"])
    check.integer("noise.scorer_epochs", noise["scorer_epochs"], minimum=1)
    check.integer("noise.seed", noise["seed"], minimum=0, allow_none=True)

    model = cfg["model"]
    hidden_widths = check.int_list("model.hidden_widths", model["hidden_widths"], minimum=1)
    check.choice("model.activation", model["activation"], SUPPORTED_ACTIVATIONS)

    opt = dict(cfg["optimizer"])
    optimizer_name = check.choice("optimizer.name", opt.pop("name"), OPTIMIZER_NAMES)
    schedule_mode = check.choice("schedule_mode", cfg["schedule_mode"], SCHEDULE_MODES)
    warmup = check.integer("optimizer.warmup_epochs", opt["warmup_epochs"], minimum=0, allow_none=True)
    ramp = check.integer("optimizer.ramp_epochs", opt["ramp_epochs"], minimum=1, allow_none=True)
    for key in ("learning_rate", "momentum", "weight_decay", "sam_radius", "kappa", "flip_ratio"):
        check.number(f"optimizer.{key}", opt[key])
    check.boolean("optimizer.normalize_noise_grad", opt["normalize_noise_grad"])
    if isinstance(opt["correction_sign"], bool):
        issues.append("optimizer.correction_sign must be +1 or -1")

    if epochs is not None:
        if warmup is None:
            warmup = epochs // 4
        elif warmup >= epochs:
            issues.append(f"optimizer.warmup_epochs ({warmup}) must be < experiment.epochs ({epochs})")
        if ramp is None:
            ramp = max(epochs - warmup, 1)

    lr = cfg["lr_schedule"]
    lr_kind = check.choice("lr_schedule.kind", lr["kind"], LR_SCHEDULE_KINDS)
    factor = check.number("lr_schedule.factor", lr["factor"])
    if factor is not None and not 0.0 < factor <= 1.0:
        issues.append(f"lr_schedule.factor must lie in (0, 1], got {factor}")
    milestones: Optional[Tuple[int, ...]] = ()
    if lr["milestones"] is not None:
        milestones = check.int_list("lr_schedule.milestones", lr["milestones"], minimum=1)
        if milestones is not None and list(milestones) != sorted(set(milestones)):
            issues.append(f"lr_schedule.milestones must be strictly increasing, got {list(milestones)}")
    elif lr_kind == "step_decay" and epochs is not None:
        milestones = tuple(sorted({max(epochs // 2, 1), max((3 * epochs) // 4, 1)}))

    diag = cfg["diagnostics"]
    for key in ("prior_std", "posterior_std"):
        value = check.number(f"diagnostics.{key}", diag[key])
        if value is not None and value <= 0:
            issues.append(f"diagnostics.{key} must be > 0, got {value}")
    perturbation_std = check.number("diagnostics.perturbation_std", diag["perturbation_std"], allow_none=True)
    if perturbation_std is not None and perturbation_std < 0:
        issues.append(f"diagnostics.perturbation_std must be >= 0, got {perturbation_std}")
    check.integer("diagnostics.sharpness_trials", diag["sharpness_trials"], minimum=0)
    check.integer("diagnostics.max_batches", diag["max_batches"], minimum=1)

    log_cfg = cfg["logging"]
    check.choice("logging.level", log_cfg["level"], LOG_LEVELS)
    check.boolean("logging.console", log_cfg["console"])

    if kind in ("two_moons", "gaussian_blobs") and batch_size is not None and not issues:
        train_size = _train_size(data)
        if batch_size > train_size:
            issues.append(f"experiment.batch_size ({batch_size}) exceeds the train set size ({train_size})")

    optimizer_config = None
    if not issues:
        try:
            optimizer_config = OptimizerConfig(
                learning_rate=float(opt["learning_rate"]),
                momentum=float(opt["momentum"]),
                weight_decay=float(opt["weight_decay"]),
                sam_radius=float(opt["sam_radius"]),
                kappa=float(opt["kappa"]),
                warmup_epochs=warmup,
                ramp_epochs=ramp,
                flip_ratio=float(opt["flip_ratio"]),
                warmup_optimizer=opt["warmup_optimizer"],
                normalize_noise_grad=opt["normalize_noise_grad"],
                correction_sign=opt["correction_sign"],
                schedule_mode=schedule_mode,
            )
        except ValueError as e:
            issues.append(str(e))

    if issues:
        raise ConfigError(issues)

    return ExperimentConfig(
        experiment=ExperimentSection(
            name=exp["name"],
            epochs=epochs,
            batch_size=batch_size,
            seeds=seeds,
            output_dir=exp["output_dir"],
            **flags,
        ),
        dataset=DatasetConfig(
            kind=kind,
            n_samples=int(data["n_samples"] or 0),
            n_features=int(data["n_features"]),
            n_classes=int(data["n_classes"]),
            separation=float(data["separation"]),
            noise_std=float(data["noise_std"]),
            test_fraction=test_fraction,
            seed=data["seed"],
            train_images=data["train_images"],
            train_labels=data["train_labels"],
            test_images=data["test_images"],
            test_labels=data["test_labels"],
        ),
        noise=NoiseSection(
            kind=noise["kind"],
            rate=rate,
            beta_params=tuple(float(b) for b in beta_params),
            pair_map=None if noise["pair_map"] is None else tuple(noise["pair_map"]),
            include_self_flip=noise["include_self_flip"],
            scorer_epochs=noise["scorer_epochs"],
            seed=noise["seed"],
        ),
        model=ModelConfig(hidden_widths=hidden_widths, activation=model["activation"]),
        optimizer_name=optimizer_name,
        optimizer=optimizer_config,
        lr_schedule=LrScheduleConfig(kind=lr_kind, milestones=milestones, factor=factor),
        diagnostics=DiagnosticsConfig(
            prior_std=float(diag["prior_std"]),
            posterior_std=float(diag["posterior_std"]),
            perturbation_std=optimizer_config.sam_radius if perturbation_std is None else perturbation_std,
            sharpness_trials=diag["sharpness_trials"],
            max_batches=diag["max_batches"],
        ),
        logging=LoggingConfig(level=log_cfg["level"], console=log_cfg["console"]),
    )
