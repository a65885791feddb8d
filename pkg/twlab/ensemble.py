"""
Runs independent simulations indexed 0..n-1, in this process or fanned out over worker processes.
Results always come back ordered by index, so aggregates do not depend on the number of workers.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence

import numpy as np

logger = logging.getLogger('twlab.ensemble')


def grouper(indices: Sequence[int], count: int):
    for start in range(0, len(indices), count):
        yield indices[start:start + count]


def _run_chunk(func: Callable, chunk: Sequence[int]) -> list:
    return [func(index) for index in chunk]


def run_indexed(func: Callable, num: int, workers: int=1, chunk_size: int=256) -> List:
    """
    Calls func(index) for every index in range(num). With more than one worker, func must be
    picklable (a module level function or a functools.partial of one).
    """
    indices = list(range(num))
    if workers <= 1 or num <= chunk_size:
        return _run_chunk(func, indices)

    logger.debug("fanning out {} simulations over {} workers".format(num, workers))
    results = []
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(_run_chunk, func, chunk) for chunk in grouper(indices, chunk_size)]
        # futures were submitted in index order
        for future in futures:
            results.extend(future.result())

    return results


class AtTime:
    """Wraps a path simulation so that only the grid value at time t comes back."""
    def __init__(self, simulate: Callable, t: float):
        self.simulate = simulate
        self.t = t

    def __call__(self, index: int) -> float:
        return self.simulate(index).at_grid(self.t)


def run_marginal(simulate: Callable, num: int, t: float, workers: int=1) -> np.ndarray:
    return np.array(run_indexed(AtTime(simulate, t), num, workers))
