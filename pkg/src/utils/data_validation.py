"""Validation of run output files read back for plotting and summaries."""

from pathlib import Path
from typing import Dict, List, Tuple
import logging

import numpy as np
import pandas as pd

from .schema import ACCURACY_COLUMNS, METRICS_COLUMNS

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"


class MetricsFileError(ValueError):
    """Raised when a metrics.csv is missing or does not follow the schema."""


class MetricsValidator:
    """Validates metrics.csv files against the documented column set."""

    REQUIRED_COLUMNS = METRICS_COLUMNS

    @staticmethod
    def validate_schema(df: pd.DataFrame) -> Tuple[bool, List[str]]:
        """Validate a metrics DataFrame.

        Args:
            df: DataFrame read from metrics.csv

        Returns:
            Tuple of (is_valid, list of error messages)
        """
        errors = []

        if list(df.columns) != MetricsValidator.REQUIRED_COLUMNS:
            missing = [c for c in MetricsValidator.REQUIRED_COLUMNS if c not in df.columns]
            extra = [c for c in df.columns if c not in MetricsValidator.REQUIRED_COLUMNS]
            if missing:
                errors.append(f"Missing columns: {', '.join(missing)}")
            if extra:
                errors.append(f"Unexpected columns: {', '.join(map(str, extra))}")
            if not missing and not extra:
                errors.append("Columns are out of order")

        if len(df) == 0:
            errors.append("metrics.csv is empty (0 rows)")

        for col in df.columns:
            if col in MetricsValidator.REQUIRED_COLUMNS:
                converted = pd.to_numeric(df[col], errors="coerce")
                bad = int(converted.isna().sum() - df[col].isna().sum())
                if bad > 0:
                    errors.append(f"Column '{col}': {bad} non-numeric values")

        if "epoch" in df.columns and len(df) > 1:
            epochs = pd.to_numeric(df["epoch"], errors="coerce").to_numpy()
            if not np.all(np.diff(epochs) > 0):
                errors.append("Epochs are not strictly increasing")

        for col in ACCURACY_COLUMNS:
            if col in df.columns:
                values = pd.to_numeric(df[col], errors="coerce")
                outside = int(((values < 0) | (values > 1)).sum())
                if outside > 0:
                    errors.append(f"Column '{col}': {outside} values outside [0, 1]")

        is_valid = len(errors) == 0
        return is_valid, errors

    @staticmethod
    def load_metrics(run_dir: str) -> pd.DataFrame:
        """Read and validate `<run_dir>/metrics.csv`.

        Raises:
            MetricsFileError: If the file is missing, unreadable or malformed
        """
        path = Path(run_dir) / METRICS_FILE
        if not path.exists():
            raise MetricsFileError(f"Metrics file not found: {path}")

        try:
            df = pd.read_csv(path)
        except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
            raise MetricsFileError(f"Cannot parse {path}: {e}") from e

        is_valid, errors = MetricsValidator.validate_schema(df)
        if not is_valid:
            raise MetricsFileError(f"Invalid {path}: {'; '.join(errors)}")
        return df

    @staticmethod
    def get_quality_report(df: pd.DataFrame) -> Dict:
        """Counts of missing diagnostics per column (e.g. epochs with no computable cos θ)."""
        report = {"total_rows": len(df), "missing_values": {}}
        for col in df.columns:
            null_count = int(df[col].isna().sum())
            if null_count > 0:
                report["missing_values"][col] = {
                    "count": null_count,
                    "percentage": float(null_count / len(df) * 100),
                }
        if report["missing_values"]:
            logger.warning(f"Metrics contain missing values: {sorted(report['missing_values'])}")
        return report
