"""Orchestrator package: single experiments and ablation grids."""

from .orchestrator import ExperimentOrchestrator, run_all_seeds, run_experiment
from .ablation import ABLATION_AXES, parse_axis_values, run_ablation_grid

__all__ = [
    "ABLATION_AXES",
    "ExperimentOrchestrator",
    "parse_axis_values",
    "run_ablation_grid",
    "run_all_seeds",
    "run_experiment",
]
