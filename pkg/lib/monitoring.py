import hashlib
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from lib import __version__

logger = logging.getLogger(__name__)


class RunStatus(Enum):
    """Status of a command run."""
    RUNNING = "running"
    COMPLETED = "completed"
    INFEASIBLE = "infeasible"
    FAILED = "failed"


@dataclass
class RunMetric:
    """A named value recorded during a run (LP solves, best utility, ...)."""
    metric_name: str
    metric_value: float
    metadata: Optional[Dict] = None


def file_digest(path: Union[str, Path]) -> str:
    """sha256 of a file's bytes, hex encoded."""
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            for block in iter(lambda: f.read(1 << 16), b""):
                digest.update(block)
    except OSError as e:
        logger.error(f"Failed to digest {path}: {e}")
        raise
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Provenance written next to every command output.

    ``started_at`` and ``duration_seconds`` vary between runs; everything
    else is a function of the command's flags and input bytes.
    """
    command: str
    config: Dict[str, Any]
    seed: Optional[int] = None
    inputs: Dict[str, str] = field(default_factory=dict)
    version: str = __version__
    status: RunStatus = RunStatus.RUNNING
    started_at: Optional[str] = None
    duration_seconds: Optional[float] = None
    metrics: List[RunMetric] = field(default_factory=list)
    error_message: Optional[str] = None

    def add_input(self, name: str, path: Union[str, Path]) -> None:
        self.inputs[name] = file_digest(path)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "inputs": dict(sorted(self.inputs.items())),
            "version": self.version,
            "status": self.status.value,
            "started_at": self.started_at,
            "duration_seconds": self.duration_seconds,
            "metrics": {m.metric_name: m.metric_value for m in self.metrics},
            "error_message": self.error_message,
        }


class RunMonitor:
    """Times one command run and fills in its manifest."""

    def __init__(self, manifest: RunManifest):
        self.manifest = manifest
        self._start: Optional[float] = None

    def __enter__(self) -> "RunMonitor":
        self._start = time.perf_counter()
        self.manifest.started_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self.manifest.status = RunStatus.RUNNING
        logger.info(f"Started {self.manifest.command} run")
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        self.manifest.duration_seconds = round(time.perf_counter() - self._start, 6)
        if exc is not None:
            self.manifest.status = RunStatus.FAILED
            self.manifest.error_message = str(exc)
            logger.error(f"Failed {self.manifest.command} run: {exc}")
        elif self.manifest.status is RunStatus.RUNNING:
            self.manifest.status = RunStatus.COMPLETED
        logger.info(
            f"Ended {self.manifest.command} run with status {self.manifest.status.value} "
            f"in {self.manifest.duration_seconds:.3f}s"
        )
        return False

    def record_metric(self, name: str, value: float, metadata: Optional[Dict] = None) -> None:
        self.manifest.metrics.append(RunMetric(name, float(value), metadata))
        logger.debug(f"Recorded metric {name}={value} for {self.manifest.command}")

    def mark_infeasible(self) -> None:
        self.manifest.status = RunStatus.INFEASIBLE
