"""Greedy offline construction driven by the relative a posteriori bound."""
import logging
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from rbhom.cell_problem import AffineSystem, CellSolution, solve_cell
from rbhom.exceptions import ConfigError
from rbhom.parametrization import AffineCoeffs, affine_coeffs
from rbhom.rb.basis import BasisBuilder, ReducedBasis, Selection
from rbhom.rb.online import bounds_from_residuals, reduced_solve, residual_norms
from rbhom.types import CellParam, ParameterBox

logger = logging.getLogger(__name__)

ZERO_SOLUTION = 1e-12

Candidate = Tuple[int, int]
ProgressCallback = Callable[[int, float], None]


def _score(basis: ReducedBasis, coeffs: AffineCoeffs) -> np.ndarray:
    """Relative bound per direction, absolute where the reduced solution vanishes."""
    if basis.size:
        w, _ = reduced_solve(basis, coeffs)
    else:
        w = np.zeros((2, 0))
    delta_w, _ = bounds_from_residuals(residual_norms(basis, coeffs, w), coeffs.alpha)
    norms = np.linalg.norm(w, axis=1)
    return np.where(norms < ZERO_SOLUTION, delta_w, delta_w / np.maximum(norms, ZERO_SOLUTION))


def _ranked(scores: np.ndarray, excluded: Set[Candidate]) -> List[Tuple[float, Candidate]]:
    ranked = [
        (float(scores[k, i]), (k, i + 1))
        for k in range(scores.shape[0])
        for i in range(2)
        if (k, i + 1) not in excluded
    ]
    ranked.sort(key=lambda item: (-item[0], item[1][0], item[1][1]))
    return ranked


def greedy_build(
    system: AffineSystem,
    sample: Sequence[CellParam],
    n_max: int,
    rel_tol: float,
    seed: int = 0,
    box: Optional[ParameterBox] = None,
    progress: Optional[ProgressCallback] = None,
) -> ReducedBasis:
    """
    Build a hierarchical basis from FE snapshots of the training sample.

    The first snapshot is the first non-zero one in sample order (direction 1 before 2).
    Each further step solves every reduced problem, evaluates the relative bound, and
    adds the truth snapshot of the worst (parameter, direction). The returned basis
    carries the max relative training bound for every basis size in ``trace``.
    """
    if not sample:
        raise ConfigError("greedy training needs a non-empty sample")
    if n_max > 2 * len(sample):
        raise ConfigError(f"n_max={n_max} exceeds the snapshot count {2 * len(sample)}")
    box = box or ParameterBox()
    coeffs = [affine_coeffs(param) for param in sample]
    truths: Dict[int, CellSolution] = {}

    def snapshot(k: int, direction: int) -> np.ndarray:
        if k not in truths:
            truths[k] = solve_cell(system, sample[k])
        return truths[k].w[direction - 1]

    builder = BasisBuilder(system)
    provenance: List[Selection] = []
    trace: List[float] = []
    excluded: Set[Candidate] = set()

    empty = builder.build(box, seed=seed)
    initial = np.array([_score(empty, c) for c in coeffs])
    for k in range(len(sample)):
        for direction in (1, 2):
            if builder.size:
                break
            vector = builder.orthogonalize(snapshot(k, direction))
            if vector is None:
                excluded.add((k, direction))
                continue
            builder.append(vector)
            provenance.append(Selection(k, sample[k], direction, float(initial[k, direction - 1])))
    if not builder.size:
        logger.warning(f"degenerate training sample: all {2 * len(sample)} snapshots vanish, basis is empty")
        return builder.build(box, seed=seed)

    while True:
        basis = builder.build(box, provenance, seed, trace)
        scores = np.array([_score(basis, c) for c in coeffs])
        max_bound = float(scores.max())
        trace.append(max_bound)
        logger.info(f"greedy N={builder.size}: max relative bound {max_bound:.3e}")
        if progress is not None:
            progress(builder.size, max_bound)
        if builder.size >= n_max or max_bound <= rel_tol:
            break

        appended = False
        for score, (k, direction) in _ranked(scores, excluded):
            vector = builder.orthogonalize(snapshot(k, direction))
            if vector is None:
                logger.warning(
                    f"snapshot (param {k}, direction {direction}) is numerically dependent on the basis; skipped"
                )
                excluded.add((k, direction))
                continue
            builder.append(vector)
            provenance.append(Selection(k, sample[k], direction, score))
            appended = True
            break
        if not appended:
            logger.warning(f"no independent snapshot left after N={builder.size}; stopping")
            break

    return builder.build(box, provenance, seed, trace)
