from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import Any

from loguru import logger


class WorkerPool:
    """
    Runs independent tasks on a pool of worker processes and hands the
    results back in task order.

    Results are always returned in the order the tasks were submitted, so a
    reduction over them is identical for any number of workers. With a single
    worker the tasks run in the calling process and no pool is created.
    """

    def __init__(self, workers: int = 1, chunksize: int | None = None):
        """
        Initializes the WorkerPool.

        Args:
            workers: Number of worker processes, at least 1.
            chunksize: Tasks sent to a worker per round trip. Defaults to a
                       value that gives each worker about four chunks.
        """
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.workers = workers
        self.chunksize = chunksize
        logger.debug(f"WorkerPool initialized with {workers} worker(s).")

    def map(self, function: Callable[..., Any], tasks: Iterable[Any]) -> list[Any]:
        """
        Applies ``function`` to every task and returns the results in order.

        Args:
            function: A module-level (picklable) callable taking one task.
            tasks: The task arguments.

        Returns:
            A list with one result per task, in submission order.
        """
        tasks = list(tasks)
        if self.workers == 1 or len(tasks) <= 1:
            return [function(task) for task in tasks]

        chunksize = self.chunksize or max(1, len(tasks) // (4 * self.workers))
        logger.debug(
            f"Dispatching {len(tasks)} tasks to {self.workers} workers "
            f"(chunksize={chunksize})."
        )
        with ProcessPoolExecutor(max_workers=self.workers) as executor:
            return list(executor.map(function, tasks, chunksize=chunksize))
