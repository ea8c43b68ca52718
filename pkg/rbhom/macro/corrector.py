"""Two-scale reconstruction u + eps * sum_i w_i(x, x/eps) d_i u sampled on a regular grid."""
import logging
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from rbhom.exceptions import ConfigError
from rbhom.fe import PeriodicMesh, element_gradients
from rbhom.macro.providers import CoefficientProvider
from rbhom.macro.solver import HomogenizedRun
from rbhom.parametrization import block_map
from rbhom.types import CellParam

logger = logging.getLogger(__name__)

MIN_SAMPLES_PER_PERIOD = 4


@dataclass(frozen=True, eq=False)
class CorrectorField:
    points: np.ndarray  # (m, 2)
    u_corrected: np.ndarray
    u_star: np.ndarray
    gradients: np.ndarray  # (m, 2)
    epsilon: float
    resolution: int
    coarse: bool

    def rows(self) -> List[dict]:
        return [
            {
                "x1": x[0],
                "x2": x[1],
                "u_corrected": corrected,
                "u_star": base,
                "grad1": grad[0],
                "grad2": grad[1],
            }
            for x, corrected, base, grad in zip(self.points, self.u_corrected, self.u_star, self.gradients)
        ]


def sample_grid(resolution: int) -> np.ndarray:
    """Points (k1/res, k2/res), k = 0..res, x1 varying fastest."""
    axis = np.arange(resolution + 1) / resolution
    return np.stack([np.tile(axis, resolution + 1), np.repeat(axis, resolution + 1)], axis=1)


def reconstruct_corrector(
    run: HomogenizedRun,
    provider: CoefficientProvider,
    cell_mesh: PeriodicMesh,
    epsilon: float,
    resolution: int,
) -> CorrectorField:
    """
    Sample the corrected field.

    Cell functions are taken at the parameter of the macro element holding each sample
    and evaluated at the reference preimage of x/eps mod 1.
    """
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    if resolution < 1:
        raise ConfigError(f"sample resolution must be positive, got {resolution}")
    coarse = epsilon * resolution < MIN_SAMPLES_PER_PERIOD
    if coarse:
        logger.warning(
            f"corrector grid resolves epsilon={epsilon} with {epsilon * resolution:.2f} samples per period "
            f"(< {MIN_SAMPLES_PER_PERIOD}); output is tagged coarse"
        )

    mesh = run.mesh
    points = sample_grid(resolution)
    elements, weights = mesh.locate(points)
    u_values = np.sum(run.u_star[mesh.elements[elements]] * weights, axis=1)
    gradients = element_gradients(mesh, run.u_star)[elements]
    fast = np.mod(points / epsilon, 1.0)

    cells: Dict[CellParam, np.ndarray] = {}
    correction = np.zeros(len(points))
    for element in np.unique(elements):
        idx = np.flatnonzero(elements == element)
        param = run.params[element]
        if param not in cells:
            cells[param] = provider.cell_functions(param)
        reference = block_map(param).inverse(fast[idx])
        w_values = cell_mesh.interpolate(cells[param], reference)  # (2, k)
        correction[idx] = np.sum(w_values.T * gradients[idx], axis=1)

    return CorrectorField(
        points=points,
        u_corrected=u_values + epsilon * correction,
        u_star=u_values,
        gradients=gradients,
        epsilon=epsilon,
        resolution=resolution,
        coarse=coarse,
    )
