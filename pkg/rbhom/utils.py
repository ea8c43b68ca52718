import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Sequence, Tuple, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """Order-preserving map; threads only when more than one worker is requested."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def timed(fn: Callable[[], R]) -> Tuple[R, float]:
    start = time.perf_counter()
    result = fn()
    return result, time.perf_counter() - start


def median_time(fn: Callable[[], object], repeats: int, warmup: int = 1) -> float:
    """Median wall-clock seconds over warm repetitions."""
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(repeats):
        _, elapsed = timed(fn)
        samples.append(elapsed)
    return statistics.median(samples)


def loglog_slope(xs: Iterable[float], ys: Iterable[float]) -> float:
    """Least-squares slope of log(y) against log(x) over strictly positive pairs."""
    pairs = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0 and np.isfinite(x) and np.isfinite(y)]
    if len(pairs) < 2:
        return float("nan")
    x, y = np.log(np.array(pairs)).T
    return float(np.polyfit(x, y, 1)[0])
