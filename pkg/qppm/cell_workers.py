import logging
from queue import Empty, Queue
from threading import Lock, Thread
from typing import Any, Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

logger: logging.Logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class CellWorkerPool:
    """Thread pool which evaluates independent tasks (typically matrix cells) taken from an internal queue.

    Each result is stored at the index of its task, so the output is identical to sequential evaluation
    regardless of how the threads were scheduled. With a single worker the tasks run in the calling thread.
    """

    def __init__(
        self, workers: int = 1, task_queue: Optional[Queue] = None, result_lock: Optional[Lock] = None
    ) -> None:
        """Constructor.

        Args:
            workers (int): Number of worker threads, >= 1. Default is 1 (sequential evaluation).
            task_queue (Queue, optional): Queue the (index, task) pairs are passed through. Default is None (an
                unbounded queue will be created internally).
            result_lock (Lock, optional): Lock guarding the error list shared by the workers. Default is None (the
                lock will be created internally).
        """

        if workers < 1:
            raise ValueError(f"Number of workers must be >= 1, got {workers}")
        self.workers = workers
        self._q: Queue = task_queue if task_queue is not None else Queue()
        self._lock = result_lock if result_lock is not None else Lock()

    def map(self, func: Callable[[T], R], tasks: Sequence[T]) -> List[R]:
        """Apply func to every task.

        Raises:
            Exception: The exception of the lowest-index failed task is re-raised after all workers finished.

        Returns:
            Results in task order.
        """

        if self.workers == 1 or len(tasks) < 2:
            return [func(task) for task in tasks]

        results: List[Any] = [None] * len(tasks)
        errors: List[Tuple[int, BaseException]] = []
        for index, task in enumerate(tasks):
            self._q.put((index, task), block=False)

        def worker() -> None:
            while True:
                try:
                    index, task = self._q.get(block=False)
                except Empty:
                    return
                try:
                    results[index] = func(task)
                except Exception as e:
                    with self._lock:
                        errors.append((index, e))
                finally:
                    self._q.task_done()

        threads = [Thread(target=worker, daemon=True) for _ in range(min(self.workers, len(tasks)))]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()

        if errors:
            index, error = min(errors, key=lambda item: item[0])
            logger.debug(f"{len(errors)} of {len(tasks)} tasks failed, re-raising the error of task {index}")
            raise error
        return results

    def map_cells(self, shape: Tuple[int, int], func: Callable[[int, int], float]) -> np.ndarray:
        """Evaluate func(row, column) for every cell of a matrix of the given shape.

        Returns:
            Float64 array of the given shape.
        """

        rows, columns = shape
        cells = [(i, j) for i in range(rows) for j in range(columns)]
        values = self.map(lambda cell: func(cell[0], cell[1]), cells)
        return np.array(values, dtype=np.float64).reshape(rows, columns)
