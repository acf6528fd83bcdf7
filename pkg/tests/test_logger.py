"""
Tests for the structured JSON logger.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

import pytest

from utils.logger import Logger


@pytest.fixture
def logger(tmp_path):
    return Logger(str(tmp_path / "logs"), session_id="test")


def test_events_are_written_to_session_file(logger, tmp_path):
    """Each event rewrites execution_<session>.json with the full trace."""
    logger.log("orchestrator", "start", {"seed": 1})
    logger.log_metric("ncsam", "epoch_seconds", 0.25, unit="s", epoch=3)

    path = tmp_path / "logs" / "execution_test.json"
    entries = json.loads(path.read_text(encoding="utf-8"))
    assert [e["event"] for e in entries] == ["start", "metric"]
    assert entries[1]["data"] == {"metric_name": "epoch_seconds", "value": 0.25, "unit": "s", "epoch": 3}
    assert entries[0]["metadata"]["data_keys"] == ["seed"]


def test_start_and_complete_are_paired(logger):
    """A *_complete event after its *_start carries duration_ms."""
    logger.log("ncsam", "train_start", {})
    logger.log("sam", "train_complete", {})
    logger.log("ncsam", "train_complete", {})
    entries = logger.get_logs()
    assert "duration_ms" not in entries[1]
    assert entries[2]["duration_ms"] >= 0.0


def test_errors_carry_exception_details(logger):
    """log_error records type and message."""
    try:
        raise ValueError("bad shape")
    except ValueError as e:
        logger.log_error("orchestrator", e, {"seed": 2})
    entry = logger.get_logs()[-1]
    assert entry["level"] == "ERROR"
    assert entry["error"]["type"] == "ValueError"
    assert entry["error"]["message"] == "bad shape"
    assert entry["metadata"]["has_error"] is True


def test_summary_stats(logger):
    """Counts per component, errors, warnings and decisions."""
    logger.log("orchestrator", "start", {})
    logger.log_warning("noise", "Instance-dependent rate clamped", {"effective_rate": 0.1})
    logger.log_decision("ncsam", "Switch from sgd warm-up to ncsam", "Warm-up finished", outputs={"epoch": 2})
    logger.log_error("orchestrator", RuntimeError("boom"))

    stats = logger.get_summary_stats()
    assert stats["session_id"] == "test"
    assert stats["total_events"] == 4
    assert stats["components"] == ["ncsam", "noise", "orchestrator"]
    assert len(stats["errors"]) == 1
    assert stats["warnings"][0]["data"]["message"] == "Instance-dependent rate clamped"
    assert stats["decisions"][0]["data"]["outputs"] == {"epoch": 2}
    assert stats["events_by_component"] == {"orchestrator": 2, "noise": 1, "ncsam": 1}


def test_console_echo_respects_level(tmp_path, capsys):
    """Only events at or above the level reach the console."""
    logger = Logger(str(tmp_path), level="WARNING", console=True, session_id="c")
    logger.log("ncsam", "epoch", {"epoch": 1, "test_acc": 0.5})
    logger.log_warning("noise", "clamped")
    out = capsys.readouterr().out
    assert "ncsam.epoch" not in out
    assert "noise.warning" in out
    assert "message: clamped" in out


def test_invalid_level_rejected(tmp_path):
    """Unknown levels raise."""
    with pytest.raises(ValueError, match="Unknown log level"):
        Logger(str(tmp_path), level="LOUD")
