#!/usr/bin/env python3
"""
flatgrad - noise-compensated sharpness-aware training at desk scale.
Main entry point: train, ablate and plot.
"""

import argparse
import sys
import traceback
from pathlib import Path
from typing import List, Optional

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / 'src'))

from dotenv import load_dotenv
from utils.config_loader import ConfigError, apply_overrides, load_config, validate_config
from utils.logger import configure_logging

__version__ = "0.1.0"

EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_CONFIG_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flatgrad",
        description="SGD / SAM / NCSAM training under label noise with per-epoch diagnostics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Run one experiment per configured seed")
    train.add_argument("--config", required=True, help="YAML or JSON config file")
    train.add_argument("--seed", type=int, help="Run this single seed instead of experiment.seeds")
    train.add_argument("--out", help="Override experiment.output_dir")
    train.add_argument("--optimizer", choices=["sgd", "sam", "ncsam"], help="Override optimizer.name")
    train.add_argument("--log-flips", action="store_true", help="Write flips.csv")

    ablate = sub.add_parser("ablate", help="Run an ablation grid and write summary.csv")
    ablate.add_argument("--config", required=True, help="YAML or JSON config file")
    ablate.add_argument("--axis", required=True, choices=["flip_ratio", "kappa", "schedule_mode"])
    ablate.add_argument("--values", required=True, help="Comma-separated axis values")
    ablate.add_argument("--out", help="Grid output directory")
    ablate.add_argument("--workers", type=int, help="Parallel runs (default: FLATGRAD_THREADS or core count)")

    plot = sub.add_parser("plot", help="Write SVG charts from metrics.csv")
    plot.add_argument("--run", required=True, action="append", help="Run directory (repeat to compare)")
    plot.add_argument("--out", help="Destination directory (default: first run directory)")
    return parser


def _load(config_path: str, **overrides):
    raw = apply_overrides(load_config(config_path), **overrides)
    return validate_config(raw)


def cmd_train(args) -> int:
    from orchestrator.orchestrator import run_all_seeds

    cfg = _load(args.config, seed=args.seed, out=args.out, optimizer=args.optimizer, log_flips=args.log_flips)
    configure_logging(cfg.logging.level)

    print(f"🚀 Training {cfg.experiment.name}")
    print(f"⚙️  Optimizer: {cfg.optimizer_name} (warm-up: {cfg.optimizer.warmup_optimizer}, "
          f"T_w={cfg.optimizer.warmup_epochs}, T={cfg.experiment.epochs})")
    print(f"🎲 Seeds: {list(cfg.experiment.seeds)}")
    print("-" * 70)

    run_dirs = run_all_seeds(cfg)

    print("\n✅ Training complete!")
    for run_dir in run_dirs:
        print(f"   - {run_dir}/metrics.csv")
    return EXIT_OK


def cmd_ablate(args) -> int:
    from orchestrator.ablation import parse_axis_values, run_ablation_grid

    cfg = _load(args.config)
    configure_logging(cfg.logging.level)
    values = parse_axis_values(args.axis, args.values)

    print(f"🚀 Ablation of {args.axis} over {values} ({len(cfg.experiment.seeds)} seed(s) each)")
    summary = run_ablation_grid(cfg, args.axis, values, out_dir=args.out, workers=args.workers)
    print(f"\n✅ Summary written: {summary}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from utils.plotting import emit_plots

    configure_logging("WARNING")
    written = emit_plots(args.run, out_dir=args.out)
    print("📈 Plots written:")
    for path in written.values():
        print(f"   - {path}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "ablate": cmd_ablate, "plot": cmd_plot}


def main(argv: Optional[List[str]] = None) -> int:
    """Main execution function; returns the process exit code."""
    load_dotenv()
    args = build_parser().parse_args(argv)

    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except KeyboardInterrupt:
        print("\n\n👋 Interrupted", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    except Exception as e:
        print(f"\n❌ Error during execution: {e}", file=sys.stderr)
        traceback.print_exc()
        return EXIT_RUNTIME_ERROR


if __name__ == '__main__':
    sys.exit(main())
