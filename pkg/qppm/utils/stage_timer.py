import logging
import time
from contextlib import contextmanager
from typing import Callable, Dict, Iterator, List, Optional

logger = logging.getLogger(__name__)


class StageTimer:
    """Wall-clock durations of named pipeline stages.

    Durations are diagnostics only, they never enter a report.
    """

    def __init__(self, name: str = "pipeline", time_function: Callable[[], float] = time.perf_counter) -> None:
        """Initialize StageTimer.

        Args:
            name (str): User-defined name of the timer. Default is 'pipeline'.
            time_function (Callable[[], float]): Function that is called in order to determine current time. Default is
                time.perf_counter.
        """

        self.name = name
        self.time_function = time_function
        self.durations: Dict[str, float] = {}
        self._order: List[str] = []
        self.creation_time = self.time_function()

    @contextmanager
    def stage(self, stage: str) -> Iterator[None]:
        """Measure the enclosed block, repeated stages accumulate."""

        start = self.time_function()
        try:
            yield
        finally:
            elapsed = self.time_function() - start
            if stage not in self.durations:
                self._order.append(stage)
                self.durations[stage] = 0.0
            self.durations[stage] += elapsed
            logger.info(f"StageTimer ({self.name}): stage '{stage}' took {elapsed:.3f} s")

    def total(self) -> float:
        return sum(self.durations.values())

    def get_statistics(self, stage: Optional[str] = None) -> Dict:
        """Get statistics.

        Args:
            stage (str, optional): Return only the duration of this stage. Default is None (all stages).

        Returns:
            Statistics dictionary
        """

        if stage is not None:
            return {"name": self.name, "stage": stage, "duration": self.durations.get(stage, 0.0)}
        return {
            "name": self.name,
            "stages": {name: self.durations[name] for name in self._order},
            "total": self.total(),
            "elapsed": self.time_function() - self.creation_time,
        }
