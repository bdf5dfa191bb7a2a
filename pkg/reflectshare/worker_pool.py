"""Process pool for evaluating placement statuses.

Batches of statuses are handed to worker processes and their results are
returned in batch order, so callers can merge them with a reduction that
does not depend on scheduling. With a single worker everything runs in the
calling process and no subprocess is spawned.

Usage from optimizer.py:

    with PlacementPool(workers) as pool:
        for outcomes in pool.map(evaluate_batch, context, batches):
            ...
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures.process import BrokenProcessPool
from functools import partial
from typing import Any, Callable, Iterator, Optional, Sequence

from loguru import logger

from reflectshare.settings import get_settings


class WorkerError(Exception):
    """Raised when a worker fails while evaluating a batch."""
    def __init__(self, message: str, batch_index: int):
        super().__init__(message)
        self.batch_index = batch_index


class WorkerDead(Exception):
    """Raised when a worker process has died unexpectedly."""


def _init_worker(log_level: str):
    # Workers start with loguru's default sink; route it the same way as the parent
    from reflectshare.log import configure_logging
    configure_logging(log_level)
    logger.debug(f"placement worker started (pid={os.getpid()})")


class PlacementPool:
    """A fixed-size pool of worker processes, or in-process evaluation when size is 1."""

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError(f"workers must be at least 1, got {workers}")
        self.workers = workers
        self._executor: Optional[ProcessPoolExecutor] = None

    def __enter__(self) -> PlacementPool:
        if self.workers > 1:
            logger.info(f"Spawning {self.workers} placement workers")
            self._executor = ProcessPoolExecutor(
                max_workers=self.workers,
                initializer=_init_worker,
                initargs=(get_settings().log_level,),
            )
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()

    def map(self, fn: Callable[[Any, Any], Any], context: Any,
            batches: Sequence[Any]) -> Iterator[Any]:
        """Apply fn(context, batch) to every batch, yielding results in batch order."""
        if self._executor is None:
            for index, batch in enumerate(batches):
                try:
                    yield fn(context, batch)
                except Exception as e:
                    raise WorkerError(f"batch {index} failed: {e}", index) from e
            return

        futures = [self._executor.submit(partial(fn, context), batch) for batch in batches]
        for index, future in enumerate(futures):
            try:
                yield future.result()
            except BrokenProcessPool as e:
                raise WorkerDead(f"worker process died while evaluating batch {index}") from e
            except Exception as e:
                raise WorkerError(f"batch {index} failed: {e}", index) from e

    def shutdown(self) -> None:
        if self._executor is not None:
            logger.debug(f"Shutting down {self.workers} placement workers")
            self._executor.shutdown(wait=True, cancel_futures=True)
            self._executor = None
