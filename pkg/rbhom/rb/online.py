"""Online stage: reduced solves and certified bounds at a cost independent of the FE size."""
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from rbhom.exceptions import EmptyBasisError, ReducedSystemError
from rbhom.parametrization import AffineCoeffs, affine_coeffs
from rbhom.rb.basis import ReducedBasis
from rbhom.types import CellParam
from rbhom.utils import timed


@dataclass(frozen=True)
class OnlineResult:
    param: CellParam
    w: np.ndarray  # (2, N)
    s: np.ndarray  # (2, 2)
    delta_w: np.ndarray  # (2,)
    delta_s: np.ndarray  # (2, 2)
    residual_norms: np.ndarray  # (2,)
    alpha: float
    gamma: float
    mean: np.ndarray
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def a_star(self) -> np.ndarray:
        return self.mean + self.s

    @property
    def w_norms(self) -> np.ndarray:
        """Reference seminorms of the reduced solutions (the basis is orthonormal)."""
        return np.linalg.norm(self.w, axis=1)


def reduced_solve(basis: ReducedBasis, coeffs: AffineCoeffs) -> Tuple[np.ndarray, np.ndarray]:
    """Reduced coefficients (2, N) and reduced loads (2, N)."""
    matrix = basis.reduced_matrix(coeffs)
    rhs = basis.reduced_rhs(coeffs)
    try:
        factor = cho_factor(matrix, lower=True)
    except LinAlgError as exc:
        eigenvalues = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
        raise ReducedSystemError(
            f"reduced stiffness of size {basis.size} is not positive definite "
            f"(smallest eigenvalue {eigenvalues.min():.3e}, alpha={coeffs.alpha:.3e})"
        ) from exc
    return cho_solve(factor, rhs.T).T, rhs


def residual_norms(basis: ReducedBasis, coeffs: AffineCoeffs, w: np.ndarray) -> np.ndarray:
    """Dual norms of both residuals, |R theta| over the factored representers."""
    thetas = np.stack([basis.theta_vector(coeffs, w[axis], axis + 1) for axis in range(2)])
    return np.linalg.norm(thetas @ basis.riesz_factor.T, axis=1)


def bounds_from_residuals(norms: np.ndarray, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    return norms / alpha, np.outer(norms, norms) / alpha


def error_bound(
    basis: ReducedBasis, param: CellParam, coeffs: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Certified bounds for reduced coefficients computed on this basis.

    :return: delta_w per direction and the 2x2 output bound delta_s
    """
    affine = affine_coeffs(param)
    return bounds_from_residuals(residual_norms(basis, affine, np.asarray(coeffs)), affine.alpha)


def online_solve(basis: ReducedBasis, param: CellParam) -> OnlineResult:
    if basis.size == 0:
        raise EmptyBasisError("online query against an empty reduced basis")
    coeffs, assembly_time = timed(lambda: affine_coeffs(param))
    (w, rhs), solve_time = timed(lambda: reduced_solve(basis, coeffs))
    norms, estimate_time = timed(lambda: residual_norms(basis, coeffs, w))
    delta_w, delta_s = bounds_from_residuals(norms, coeffs.alpha)
    s = -(w @ rhs.T)
    return OnlineResult(
        param=param,
        w=w,
        s=s,
        delta_w=delta_w,
        delta_s=delta_s,
        residual_norms=norms,
        alpha=coeffs.alpha,
        gamma=coeffs.gamma,
        mean=coeffs.mean,
        timings={"assembly": assembly_time, "solve": solve_time, "estimate": estimate_time},
    )
