# This file is part of qpf_cylinder.
#
# See the COPYRIGHT file at the top-level directory of this distribution
# for details of code ownership.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

__all__ = ["WorkerPool"]

logger = logging.getLogger("qpf.cylinder.worker")

T = TypeVar("T")
R = TypeVar("R")


class WorkerPool:
    """A pool of threads that evaluates independent tasks.

    Results are always returned in the order of the inputs, so the pool
    size changes the wall time of a computation but never its result.

    Attributes
    ----------
    _jobs :
        Number of worker threads. A single job runs tasks inline.
    _executor :
        The executor, created on first use.
    """

    _jobs: int
    _executor: ThreadPoolExecutor | None

    def __init__(self, jobs: int = 1):
        if jobs < 1:
            raise ValueError(f"The number of jobs must be positive, received {jobs}")
        self._jobs = jobs
        self._executor = None

    @property
    def jobs(self) -> int:
        return self._jobs

    def map(self, func: Callable[[T], R], items: Iterable[T]) -> list[R]:
        """Apply ``func`` to every item, preserving order."""
        tasks = list(items)

        def run(indexed: tuple[int, T]) -> R:
            index, task = indexed
            logger.worker(f"Job {index + 1}/{len(tasks)}")
            return func(task)

        if self._jobs == 1 or len(tasks) <= 1:
            return [run(indexed) for indexed in enumerate(tasks)]
        if self._executor is None:
            logger.worker(f"Starting {self._jobs} worker threads")
            self._executor = ThreadPoolExecutor(max_workers=self._jobs, thread_name_prefix="qpf")
        return list(self._executor.map(run, enumerate(tasks)))

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self) -> WorkerPool:
        return self

    def __exit__(self, *args) -> None:
        self.close()
