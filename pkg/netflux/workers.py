"""Fixed-size thread pool draining a queue of independent replica tasks."""

from __future__ import annotations

import logging
import math
import threading
from collections import deque
from typing import Any, Callable, Optional

from netflux.errors import CampaignError, ConfigError, SolverError

logger = logging.getLogger(__name__)


class ReplicaPool:
    """
    Runs fn over a list of tasks on worker threads.

    Results are stored by task index, so the output order never depends on
    scheduling. A task whose solve fails is dropped (its slot stays None)
    and counted against the failure budget. Any other exception stops the
    pool and is re-raised from map.
    """

    def __init__(self, workers: int = 1, failure_budget: float = 0.0):
        if workers < 1:
            raise ConfigError(f"workers must be positive, got {workers}")
        self.workers = workers
        self.failure_budget = failure_budget
        self.failed: list[int] = []

    def map(
        self,
        fn: Callable[[Any], Any],
        tasks: list,
        describe: Optional[Callable[[Any], str]] = None,
    ) -> list:
        results: list = [None] * len(tasks)
        task_queue = deque(enumerate(tasks))
        queue_lock = threading.Lock()
        failed: list[int] = []
        errors: list[BaseException] = []
        describe = describe or repr

        def _work_loop():
            while True:
                with queue_lock:
                    if errors or not task_queue:
                        return
                    index, task = task_queue.popleft()
                try:
                    results[index] = fn(task)
                except SolverError as e:
                    logger.warning("Dropping task %s: %s", describe(task), e)
                    with queue_lock:
                        failed.append(index)
                except Exception as e:
                    logger.error("Task %s raised %s", describe(task), e)
                    with queue_lock:
                        errors.append(e)
                    return

        if self.workers == 1 or len(tasks) <= 1:
            _work_loop()
        else:
            threads = [
                threading.Thread(target=_work_loop, daemon=True, name=f"netflux-worker-{i}")
                for i in range(min(self.workers, len(tasks)))
            ]
            for thread in threads:
                thread.start()
            for thread in threads:
                thread.join()

        self.failed = sorted(failed)
        if errors:
            raise errors[0]
        allowed = math.floor(self.failure_budget * len(tasks))
        if len(failed) > allowed:
            raise CampaignError(
                f"{len(failed)} of {len(tasks)} tasks failed, budget allows {allowed}"
            )
        return results
