import time
import uuid
from contextlib import contextmanager
from typing import Iterator, Optional

from src.config.logging import clear_context, get_logger, set_command, set_roi, set_run_id

logger = get_logger(__name__)


class RunStats:
    """Filled in by the command; read back for the run report."""

    def __init__(self, run_id: str, command: str):
        self.run_id = run_id
        self.command = command
        self.started = time.perf_counter()
        self.duration_seconds: Optional[float] = None

    def elapsed(self) -> float:
        return time.perf_counter() - self.started


@contextmanager
def track_command(command: str, roi: Optional[str] = None, **fields) -> Iterator[RunStats]:
    """Bind a fresh run id to every log record of one command and log start/complete/fail with wall time."""
    run_id = str(uuid.uuid4())
    set_run_id(run_id)
    set_command(command)
    set_roi(roi)
    stats = RunStats(run_id, command)
    logger.info("command_started", **fields)
    try:
        yield stats
        stats.duration_seconds = stats.elapsed()
        logger.info("command_completed", duration_seconds=round(stats.duration_seconds, 4))
    except Exception as e:
        stats.duration_seconds = stats.elapsed()
        logger.error("command_failed", duration_seconds=round(stats.duration_seconds, 4), error=str(e), exc_info=True)
        raise
    finally:
        clear_context()


@contextmanager
def roi_scope(roi: Optional[str]) -> Iterator[None]:
    """Tag log records with an ROI for the duration of one per-ROI pipeline run."""
    set_roi(roi)
    try:
        yield
    finally:
        set_roi(None)
