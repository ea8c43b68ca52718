"""
Symmetric positive (semi)definite sparse solves with an explicit residual contract.

Periodic systems are made definite by pinning one node (quotient by constants); macro
systems by eliminating their Dirichlet nodes. Both are expressed as a set of fixed
degrees of freedom that are held at zero.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg, splu

from rbhom.enums import SolverMethod
from rbhom.exceptions import IncompatibleRhsError, MeshError, SolverConvergenceError

logger = logging.getLogger(__name__)

ROUNDOFF_FACTOR = 64.0
COMPATIBILITY_TOL = 1e-10


@dataclass(frozen=True)
class QuotientConstraint:
    """Representative of H1/R fixed by a zero value at one node."""

    pinned_node: int = 0


class SpdSolver:
    """
    Reusable solver for a fixed matrix with some degrees of freedom held at zero.

    The direct method factorizes once with SuperLU; the CG method uses a Jacobi
    preconditioner and an iteration cap of ten times the reduced dimension.
    """

    def __init__(
        self,
        matrix: sp.spmatrix,
        fixed: Sequence[int] = (),
        method: SolverMethod = SolverMethod.DIRECT,
        rel_tol: float = 1e-12,
        constant_kernel: bool = False,
    ):
        matrix = sp.csr_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise MeshError(f"solver needs a square matrix, got {matrix.shape}")
        self.size = matrix.shape[0]
        self.method = SolverMethod(method)
        self.rel_tol = rel_tol
        self.constant_kernel = constant_kernel
        mask = np.ones(self.size, dtype=bool)
        mask[np.asarray(fixed, dtype=int)] = False
        self.free = np.flatnonzero(mask)
        self.reduced = matrix[self.free][:, self.free].tocsc()
        self.norm_inf = float(abs(self.reduced).sum(axis=1).max()) if len(self.free) else 0.0
        self._lu = splu(self.reduced) if self.method == SolverMethod.DIRECT and len(self.free) else None
        diagonal = self.reduced.diagonal()
        self._jacobi = LinearOperator(self.reduced.shape, matvec=lambda x: x / diagonal, dtype=float)

    @classmethod
    def for_quotient(cls, matrix, constraint: QuotientConstraint = QuotientConstraint(), **kwargs) -> "SpdSolver":
        return cls(matrix, fixed=[constraint.pinned_node], constant_kernel=True, **kwargs)

    def check_compatible(self, rhs: np.ndarray):
        """Right-hand sides of the periodic problem must be orthogonal to the constants."""
        columns = rhs.reshape(self.size, -1)
        constant_part = np.abs(columns.sum(axis=0)) / np.sqrt(self.size)
        scale = np.maximum(1.0, np.linalg.norm(columns, axis=0))
        if np.any(constant_part > COMPATIBILITY_TOL * scale):
            raise IncompatibleRhsError(
                f"right-hand side has a constant component of {constant_part.max():.3e}; "
                "the periodic problem is only solvable for mean-free data"
            )

    def _raw_solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is not None:
            return self._lu.solve(rhs)
        solution = np.empty_like(rhs)
        maxiter = 10 * len(self.free)
        for col in range(rhs.shape[1]):
            values, info = cg(self.reduced, rhs[:, col], rtol=self.rel_tol, maxiter=maxiter, M=self._jacobi)
            if info != 0:
                residual = np.linalg.norm(self.reduced @ values - rhs[:, col])
                raise SolverConvergenceError("conjugate gradients did not converge", residual, info)
            solution[:, col] = values
        return solution

    def _residual_ok(self, rhs: np.ndarray, solution: np.ndarray):
        residual = np.linalg.norm(self.reduced @ solution - rhs, axis=0)
        allowed = self.rel_tol * np.linalg.norm(rhs, axis=0) + ROUNDOFF_FACTOR * np.finfo(float).eps * (
            self.norm_inf * np.linalg.norm(solution, axis=0)
        )
        return residual, residual <= allowed

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """
        Solve for one right-hand side (shape (n,)) or a batch (shape (n, k)).

        :return: solution(s) with the fixed degrees of freedom set to zero
        :raises IncompatibleRhsError: periodic rhs with a constant component
        :raises SolverConvergenceError: residual contract not met after one refinement step
        """
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.size:
            raise MeshError(f"rhs has {rhs.shape[0]} entries, system has {self.size}")
        single = rhs.ndim == 1
        columns = rhs.reshape(self.size, -1)
        result = np.zeros_like(columns)
        if not np.any(columns) or not len(self.free):
            return result[:, 0] if single else result
        if self.constant_kernel:
            self.check_compatible(columns)

        reduced_rhs = columns[self.free]
        solution = self._raw_solve(reduced_rhs)
        residual, ok = self._residual_ok(reduced_rhs, solution)
        if not np.all(ok):
            correction = self._raw_solve(reduced_rhs - self.reduced @ solution)
            solution = solution + correction
            residual, ok = self._residual_ok(reduced_rhs, solution)
            if not np.all(ok):
                raise SolverConvergenceError("residual contract violated after refinement", float(residual.max()))
        logger.debug(f"{self.method.value} solve: {columns.shape[1]} rhs, max residual {residual.max():.3e}")
        result[self.free] = solution
        return result[:, 0] if single else result


def solve_spd(
    matrix: sp.spmatrix,
    rhs: np.ndarray,
    constraint: Optional[QuotientConstraint] = None,
    rel_tol: float = 1e-12,
    method: SolverMethod = SolverMethod.DIRECT,
) -> np.ndarray:
    """One-shot periodic solve: pinned node = 0, rhs must be mean-free."""
    solver = SpdSolver.for_quotient(matrix, constraint or QuotientConstraint(), method=method, rel_tol=rel_tol)
    return solver.solve(rhs)


def h1_semi_inner(u: np.ndarray, v: np.ndarray, laplacian: sp.spmatrix) -> float:
    """u^T K_ref v."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    size = laplacian.shape[0]
    if u.shape != (size,) or v.shape != (size,):
        raise MeshError(f"vectors of shape {u.shape} and {v.shape} do not match a system of size {size}")
    return float(u @ (laplacian @ v))
