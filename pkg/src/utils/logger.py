"""Logger utility for structured logging."""

import json
import logging
from pathlib import Path
from datetime import datetime
from typing import Dict, Any, Optional
import traceback

LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def configure_logging(level: str = "INFO"):
    """Route library `logging` records (warnings from the numeric modules) to stderr."""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


class Logger:
    """Structured JSON logger for experiment execution traces."""

    def __init__(
        self,
        log_dir: str,
        level: str = "INFO",
        console: bool = False,
        session_id: Optional[str] = None,
    ):
        """Initialize logger.

        Args:
            log_dir: Directory receiving execution_<session>.json
            level: Minimum level echoed to the console
            console: Whether to echo events to the console at all
            session_id: Optional fixed session id (defaults to a timestamp)
        """
        if level not in LEVELS:
            raise ValueError(f"Unknown log level '{level}', expected one of {LEVELS}")
        self.level = level
        self.console = console
        self.logs_dir = Path(log_dir)
        self.logs_dir.mkdir(parents=True, exist_ok=True)

        self.session_id = session_id or datetime.now().strftime("%Y%m%d_%H%M%S")
        self.log_file = self.logs_dir / f"execution_{self.session_id}.json"
        self.logs = []
        self.event_start_times = {}  # Track event start times for duration calculation

    def log(
        self,
        component: str,
        event: str,
        data: Dict[str, Any],
        level: str = "INFO",
        error: Optional[Exception] = None,
    ):
        """Log an event with enhanced metadata.

        Args:
            component: Component name (orchestrator, warmup, ncsam, ...)
            event: Event type (start, complete, epoch, error, etc.)
            data: Event data; must be JSON serializable
            level: Log level (DEBUG, INFO, WARNING, ERROR)
            error: Optional exception object for error events
        """
        timestamp = self.get_timestamp()

        # Calculate duration if this is a completion event
        duration_ms = None
        phase = event.rsplit("_", 1)[-1]
        event_key = f"{component}:{event[: -len(phase)]}"

        if phase == "start":
            self.event_start_times[event_key] = datetime.now()
        elif phase == "complete" and event_key in self.event_start_times:
            duration = datetime.now() - self.event_start_times.pop(event_key)
            duration_ms = duration.total_seconds() * 1000

        log_entry = {
            "timestamp": timestamp,
            "session_id": self.session_id,
            "component": component,
            "event": event,
            "level": level,
            "data": data,
        }

        if duration_ms is not None:
            log_entry["duration_ms"] = round(duration_ms, 2)

        if error is not None:
            log_entry["error"] = {
                "type": type(error).__name__,
                "message": str(error),
                "traceback": traceback.format_exc(),
            }

        log_entry["metadata"] = {
            "component": component,
            "event_type": event,
            "has_error": error is not None,
            "data_keys": list(data.keys()) if data else [],
        }

        self.logs.append(log_entry)

        with open(self.log_file, "w", encoding="utf-8") as f:
            json.dump(self.logs, f, indent=2)

        self._print_to_console(log_entry)

    def _print_to_console(self, log_entry: Dict[str, Any]):
        """Print log entry to console with formatting."""
        if not self.console or LEVELS.index(log_entry["level"]) < LEVELS.index(self.level):
            return

        level = log_entry["level"]
        duration_str = ""
        if "duration_ms" in log_entry:
            duration_str = f" ({log_entry['duration_ms']:.2f}ms)"

        colors = {
            "DEBUG": "\033[90m",
            "INFO": "\033[94m",
            "WARNING": "\033[93m",
            "ERROR": "\033[91m",
            "RESET": "\033[0m",
        }
        color = colors.get(level, colors["RESET"])
        reset = colors["RESET"]

        print(
            f"{color}[{log_entry['timestamp']}] {level}: "
            f"{log_entry['component']}.{log_entry['event']}{duration_str}{reset}"
        )
        data_summary = self._format_data_summary(log_entry.get("data", {}))
        if data_summary:
            print(f"  → {data_summary}")

        if "error" in log_entry:
            error_info = log_entry["error"]
            print(f"  ✗ {error_info['type']}: {error_info['message']}")

    def _format_data_summary(self, data: Dict[str, Any]) -> str:
        """Short one-line summary of the fields worth seeing on a terminal."""
        if not data:
            return ""

        highlight_fields = [
            "epoch",
            "optimizer",
            "train_loss",
            "test_acc",
            "schedule_scale",
            "metric_name",
            "value",
            "message",
        ]
        summary_parts = []
        for field in highlight_fields:
            if field not in data:
                continue
            value = data[field]
            if isinstance(value, float):
                summary_parts.append(f"{field}: {value:.4g}")
            else:
                summary_parts.append(f"{field}: {value}")

        return ", ".join(summary_parts) if summary_parts else json.dumps(data, default=str)

    def log_metric(
        self,
        component: str,
        metric_name: str,
        metric_value: Any,
        unit: Optional[str] = None,
        epoch: Optional[int] = None,
    ):
        """Log a specific metric value.

        Args:
            component: Component name
            metric_name: Name of the metric
            metric_value: Value of the metric
            unit: Optional unit (e.g., 's', 'count')
            epoch: Optional epoch the metric belongs to
        """
        data = {"metric_name": metric_name, "value": metric_value}
        if unit:
            data["unit"] = unit
        if epoch is not None:
            data["epoch"] = epoch

        self.log(component, "metric", data, level="INFO")

    def log_error(self, component: str, error: Exception, context: Optional[Dict] = None):
        """Log an error with full context."""
        self.log(component, "error", context or {}, level="ERROR", error=error)

    def log_warning(self, component: str, message: str, data: Optional[Dict] = None):
        """Log a warning."""
        warning_data = {"message": message}
        if data:
            warning_data.update(data)

        self.log(component, "warning", warning_data, level="WARNING")

    def log_decision(
        self,
        component: str,
        decision: str,
        reasoning: str,
        inputs: Optional[Dict] = None,
        outputs: Optional[Dict] = None,
    ):
        """Log a run-level decision (phase switch, derived default) with its reason.

        Args:
            component: Component name
            decision: What was decided
            reasoning: Why
            inputs: Optional input data summary
            outputs: Optional output data summary
        """
        data = {
            "decision": decision,
            "reasoning": reasoning,
        }
        if inputs:
            data["inputs"] = inputs
        if outputs:
            data["outputs"] = outputs

        self.log(component, "decision", data, level="INFO")

    def get_timestamp(self) -> str:
        return datetime.now().isoformat()

    def get_logs(self) -> list:
        return self.logs

    def get_summary_stats(self) -> Dict[str, Any]:
        """Get summary statistics for this session.

        Returns:
            Dictionary with summary statistics
        """
        stats = {
            "session_id": self.session_id,
            "total_events": len(self.logs),
            "components": sorted(set(log["component"] for log in self.logs)),
            "errors": [log for log in self.logs if log.get("level") == "ERROR"],
            "warnings": [log for log in self.logs if log.get("level") == "WARNING"],
            "decisions": [log for log in self.logs if log.get("event") == "decision"],
            "total_duration_ms": sum(log.get("duration_ms", 0) for log in self.logs),
        }

        stats["events_by_component"] = {}
        for log in self.logs:
            component = log["component"]
            stats["events_by_component"][component] = stats["events_by_component"].get(component, 0) + 1

        return stats
