"""
Logging setup and stage timing

All modules log through loguru. The CLI routes the single sink to stderr
so that CSV written to stdout is never interleaved with log lines.
"""
import time
from types import TracebackType
from typing import Optional

import click
from loguru import logger


def configure_logging(level: str) -> None:
    """Replace loguru's default sink with a click-backed stderr sink."""
    logger.remove()
    logger.add(lambda msg: click.echo(msg, nl=False, err=True), level=level, colorize=True)


class StageTimer:
    """
    Context manager that measures and logs the wall time of one stage.

    Used around every sweep row and search so the elapsed time is both
    logged and available to callers:

        with StageTimer("achievable pairs=3") as timer:
            result = search_placements(...)
        row.wall_time = timer.elapsed
    """

    def __init__(self, stage: str, level: str = "INFO"):
        self.stage = stage
        self.level = level
        self.elapsed = 0.0
        self._start = 0.0

    def __enter__(self) -> "StageTimer":
        self._start = time.perf_counter()
        logger.debug(f"{self.stage} started")
        return self

    def __exit__(self, exc_type: Optional[type[BaseException]],
                 exc: Optional[BaseException],
                 tb: Optional[TracebackType]) -> None:
        self.elapsed = time.perf_counter() - self._start
        if exc is None:
            logger.log(self.level, f"{self.stage} finished in {self.elapsed:.3f}s")
        else:
            # Failures are reported by the caller; only note where time went
            logger.warning(f"{self.stage} failed after {self.elapsed:.3f}s: {exc}")
