"""High-fidelity cell problems on the reference mesh and the homogenized tensor."""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from rbhom.enums import SolverMethod
from rbhom.fe import (
    BLOCK_COUNT,
    PeriodicMesh,
    QuotientConstraint,
    SpdSolver,
    assemble_block_load,
    assemble_block_stiffness,
)
from rbhom.exceptions import MeshMismatchError
from rbhom.parametrization import AffineCoeffs, affine_coeffs
from rbhom.types import CellParam

logger = logging.getLogger(__name__)

TERM_COUNT = 2 * BLOCK_COUNT


def term_index(block: int, direction: int) -> int:
    """Affine term q = 2k + (d-1)."""
    return 2 * block + direction - 1


@dataclass(frozen=True, eq=False)
class AffineSystem:
    """Parameter-independent blocks M_q, G_q of the pulled-back cell problem, assembled once."""

    mesh: PeriodicMesh
    stiffness_blocks: Tuple[sp.csr_matrix, ...]
    load_blocks: np.ndarray  # (18, n_nodes), row q
    laplacian: sp.csr_matrix
    constraint: QuotientConstraint = QuotientConstraint()
    method: SolverMethod = SolverMethod.DIRECT
    rel_tol: float = 1e-12

    @property
    def size(self) -> int:
        return self.mesh.node_count

    @property
    def fingerprint(self) -> bytes:
        return self.mesh.fingerprint

    @cached_property
    def laplacian_solver(self) -> SpdSolver:
        return SpdSolver.for_quotient(self.laplacian, self.constraint, method=self.method, rel_tol=self.rel_tol)

    def riesz(self, functionals: np.ndarray) -> np.ndarray:
        """Riesz representers in the reference seminorm of one or more mean-free functionals."""
        return self.laplacian_solver.solve(functionals)

    def seminorm(self, values: np.ndarray) -> float:
        return float(np.sqrt(max(values @ (self.laplacian @ values), 0.0)))

    def dual_norm(self, functional: np.ndarray) -> float:
        """Dual norm computed the expensive way: solve for the representer, take its seminorm."""
        return self.seminorm(self.riesz(functional))

    def stiffness_with(self, weights: np.ndarray) -> sp.csr_matrix:
        matrix = sp.csr_matrix((self.size, self.size))
        for weight, block in zip(weights, self.stiffness_blocks):
            matrix = matrix + weight * block
        return matrix

    def loads_with(self, load_weights: np.ndarray) -> np.ndarray:
        """F_i = -sum_k chat_{k,i} G_{k,i}, stacked as (2, n_nodes)."""
        return np.stack(
            [-(load_weights[:, axis] @ self.load_blocks[axis::2]) for axis in range(2)]
        )

    def check_compatible(self, other: "AffineSystem"):
        if self.fingerprint != other.fingerprint:
            raise MeshMismatchError(
                f"systems built on different meshes (n_per_side {self.mesh.n_per_side} vs {other.mesh.n_per_side})"
            )


@dataclass(frozen=True, eq=False)
class CellSolution:
    """Both directional cell functions, pinned to zero at the quotient node."""

    param: Optional[CellParam]
    coeffs: AffineCoeffs
    w: np.ndarray  # (2, n_nodes)
    loads: np.ndarray  # (2, n_nodes)
    residual: float


@dataclass(frozen=True)
class HomogTensor:
    a_star: np.ndarray
    s: np.ndarray
    bounds: Optional[np.ndarray] = None


def build_affine_system(
    mesh: PeriodicMesh, method: SolverMethod = SolverMethod.DIRECT, rel_tol: float = 1e-12
) -> AffineSystem:
    blocks: List[sp.csr_matrix] = []
    loads = np.zeros((TERM_COUNT, mesh.node_count))
    for block in range(BLOCK_COUNT):
        for direction in (1, 2):
            q = term_index(block, direction)
            blocks.append(assemble_block_stiffness(mesh, block, direction))
            loads[q] = assemble_block_load(mesh, block, direction)
    laplacian = blocks[0]
    for block in blocks[1:]:
        laplacian = laplacian + block
    loads.setflags(write=False)
    logger.debug(f"affine system on n_per_side={mesh.n_per_side}: {mesh.node_count} dofs, {TERM_COUNT} terms")
    return AffineSystem(
        mesh=mesh,
        stiffness_blocks=tuple(blocks),
        load_blocks=loads,
        laplacian=sp.csr_matrix(laplacian),
        method=SolverMethod(method),
        rel_tol=rel_tol,
    )


def assemble_with(system: AffineSystem, coeffs: AffineCoeffs) -> Tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
    stiffness = system.stiffness_with(coeffs.stiffness_terms)
    loads = system.loads_with(coeffs.load)
    return stiffness, loads[0], loads[1]


def assemble_at(system: AffineSystem, param: CellParam) -> Tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
    """K(x) and the two loads F_1(x), F_2(x)."""
    return assemble_with(system, affine_coeffs(param))


def solve_cell_with(system: AffineSystem, coeffs: AffineCoeffs, param: Optional[CellParam] = None) -> CellSolution:
    stiffness, load_1, load_2 = assemble_with(system, coeffs)
    loads = np.stack([load_1, load_2])
    solver = SpdSolver.for_quotient(stiffness, system.constraint, method=system.method, rel_tol=system.rel_tol)
    w = solver.solve(loads.T).T
    scale = max(float(np.linalg.norm(loads)), np.finfo(float).tiny)
    residual = float(np.linalg.norm(stiffness @ w.T - loads.T) / scale) if np.any(loads) else 0.0
    return CellSolution(param=param, coeffs=coeffs, w=w, loads=loads, residual=residual)


def solve_cell(system: AffineSystem, param: CellParam) -> CellSolution:
    return solve_cell_with(system, affine_coeffs(param), param)


def homogenized_tensor(system: AffineSystem, sol: CellSolution) -> HomogTensor:
    """s_ij = -F_j . w_i and a_star = cell average + s."""
    if sol.w.shape[1] != system.size:
        raise MeshMismatchError(f"cell solution has {sol.w.shape[1]} dofs, system has {system.size}")
    s = -(sol.w @ sol.loads.T)
    return HomogTensor(a_star=sol.coeffs.mean + s, s=s)


def truth_tensor(system: AffineSystem, param: CellParam) -> HomogTensor:
    return homogenized_tensor(system, solve_cell(system, param))


def check_voigt_reuss(tensor: HomogTensor, coeffs: AffineCoeffs, tol: float = 1e-8) -> bool:
    """Eigenvalues of a_star between the harmonic and arithmetic means of the coefficient."""
    eigenvalues = np.linalg.eigvalsh(0.5 * (tensor.a_star + tensor.a_star.T))
    return bool(eigenvalues.min() >= coeffs.harmonic_mean - tol and eigenvalues.max() <= coeffs.arithmetic_mean + tol)
