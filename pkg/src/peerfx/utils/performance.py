"""
Run monitoring and worker sizing for peerfx
"""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, TypeVar

import psutil

from .helpers import chunk_ranges

logger = logging.getLogger(__name__)

MAX_WORKERS = 8
DEFAULT_CHUNK_SIZE = 256

T = TypeVar('T')


def recommended_workers(requested: int = 0) -> int:
    """Worker threads for draw loops: the request, or physical cores capped at MAX_WORKERS"""
    if requested and requested > 0:
        return int(requested)
    physical = psutil.cpu_count(logical=False) or 1
    return max(1, min(MAX_WORKERS, physical))


def map_chunks(func: Callable[[int, int], T], total: int, workers: int = 1,
               chunk_size: int = DEFAULT_CHUNK_SIZE) -> List[T]:
    """Apply func(start, stop) over fixed-size index chunks, results in chunk order.

    Chunk boundaries do not depend on the worker count, so reductions over the
    ordered results are reproducible.
    """
    ranges = list(chunk_ranges(total, chunk_size))
    if workers <= 1 or len(ranges) <= 1:
        return [func(start, stop) for start, stop in ranges]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(func, start, stop) for start, stop in ranges]
        return [future.result() for future in futures]


@dataclass
class RunSnapshot:
    """Resource usage of the current process at one point"""
    wall_time: float = field(default_factory=time.perf_counter)
    memory_mb: float = 0.0
    thread_count: int = 0
    process_id: int = field(default_factory=os.getpid)

    def to_dict(self) -> Dict:
        return {
            'memory_mb': self.memory_mb,
            'thread_count': self.thread_count,
            'process_id': self.process_id,
        }


class RunMonitor:
    """Records wall time and resident memory around a command; logs at DEBUG only"""

    def __init__(self, label: str):
        self.label = label
        self.process = psutil.Process()
        self._start: Optional[RunSnapshot] = None
        self._end: Optional[RunSnapshot] = None

    def _take_snapshot(self) -> RunSnapshot:
        try:
            return RunSnapshot(
                memory_mb=self.process.memory_info().rss / 1024 / 1024,
                thread_count=self.process.num_threads(),
            )
        except (psutil.NoSuchProcess, psutil.AccessDenied) as e:
            logger.debug("Could not read process metrics: %s", e)
            return RunSnapshot()

    def __enter__(self) -> 'RunMonitor':
        self._start = self._take_snapshot()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self._end = self._take_snapshot()
        logger.debug("%s finished in %.3fs, memory %.1fMB -> %.1fMB",
                     self.label, self.elapsed_seconds, self._start.memory_mb, self._end.memory_mb)
        return False

    @property
    def elapsed_seconds(self) -> float:
        if self._start is None:
            return 0.0
        end = self._end.wall_time if self._end is not None else time.perf_counter()
        return end - self._start.wall_time

    def get_statistics(self) -> Dict:
        return {
            'label': self.label,
            'elapsed_seconds': self.elapsed_seconds,
            'start': self._start.to_dict() if self._start else None,
            'end': self._end.to_dict() if self._end else None,
        }
