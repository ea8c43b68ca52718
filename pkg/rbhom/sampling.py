from typing import List

import numpy as np

from rbhom.types import CellParam, SampleSpec


def sample_array(spec: SampleSpec) -> np.ndarray:
    """
    Uniform draws over the box, one row per parameter in (b1, c1, b2, c2, theta) order.

    Uses the counter-based Philox generator keyed by the seed, so the same seed gives the
    same sample on every platform.
    """
    rng = np.random.Generator(np.random.Philox(spec.seed))
    unit = rng.random((spec.count, 5))
    lower, upper = spec.box.lower, spec.box.upper
    return lower + (upper - lower) * unit


def draw_sample(spec: SampleSpec) -> List[CellParam]:
    return [CellParam.from_array(row) for row in sample_array(spec)]
