"""SVG line charts of per-epoch metrics for one or more runs."""

import io
from pathlib import Path
from typing import Dict, List, Optional, Sequence
import logging

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .data_validation import MetricsFileError, MetricsValidator  # noqa: E402
from .schema import PLOT_SERIES  # noqa: E402

logger = logging.getLogger(__name__)

# Fixed ids and <text> glyphs so the same metrics give the same SVG bytes
SVG_RC = {"svg.hashsalt": "flatgrad", "svg.fonttype": "none"}


def _run_labels(run_dirs: Sequence[Path]) -> List[str]:
    labels = [d.name for d in run_dirs]
    if len(set(labels)) == len(labels):
        return labels
    return [f"{d.parent.name}/{d.name}" for d in run_dirs]


def _render(frames, labels: List[str], column: str, ylabel: str) -> str:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    try:
        for frame, label in zip(frames, labels):
            ax.plot(frame["epoch"], frame[column], marker=".", label=label)
        ax.set_xlabel("epoch")
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        buffer = io.StringIO()
        fig.savefig(buffer, format="svg", metadata={"Date": None})
        return buffer.getvalue()
    finally:
        plt.close(fig)


def emit_plots(run_dirs: Sequence[str], out_dir: Optional[str] = None) -> Dict[str, Path]:
    """Write test_acc.svg, schedule_scale.svg and cos_theta.svg.

    Every metrics.csv is validated and every figure rendered before any file
    is written, so a bad input leaves no partial output.

    Args:
        run_dirs: Run directories, one series each; the legend uses their names
        out_dir: Destination (defaults to the first run directory)

    Returns:
        Mapping of file name to written path

    Raises:
        MetricsFileError: If any metrics.csv is missing or malformed
    """
    if not run_dirs:
        raise MetricsFileError("emit_plots needs at least one run directory")
    dirs = [Path(d) for d in run_dirs]
    frames = [MetricsValidator.load_metrics(d) for d in dirs]
    labels = _run_labels(dirs)

    with matplotlib.rc_context(SVG_RC):
        rendered = {
            name: _render(frames, labels, column, ylabel)
            for name, (column, ylabel) in PLOT_SERIES.items()
        }

    destination = Path(out_dir) if out_dir else dirs[0]
    destination.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, svg in rendered.items():
        path = destination / name
        path.write_text(svg, encoding="utf-8")
        written[name] = path
    logger.info(f"Wrote {len(written)} plots for {len(dirs)} run(s) to {destination}")
    return written
