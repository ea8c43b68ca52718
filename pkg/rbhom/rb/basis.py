"""
Reduced basis container and its incremental builder.

Riesz representers are kept in one hierarchical layout: the 18 load representers
X^-1(-G_q) first, then for each basis vector n the 18 stiffness representers
X^-1(M_q xi_n) at index 18 + 18 n + q. Truncating the basis to its first n vectors
therefore truncates the Gram matrix to its leading 18 + 18 n block.

The representers are also factored as Q R with Q orthonormal in the reference inner
product, so the dual norm of a residual with weights theta is |R theta|.
R is upper triangular and nests under truncation the same way.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from rbhom.cell_problem import TERM_COUNT, AffineSystem
from rbhom.exceptions import BasisFileError, MeshMismatchError
from rbhom.parametrization import AffineCoeffs
from rbhom.types import CellParam, ParameterBox

logger = logging.getLogger(__name__)

REPASS_RATIO = 1e-6
DEPENDENT_RATIO = 1e-12
ZERO_SNAPSHOT = 1e-12
RIESZ_PASSES = 2


@dataclass(frozen=True)
class Selection:
    """One greedy pick: training parameter, direction and the bound that selected it."""

    param_id: int
    param: CellParam
    direction: int
    bound: float


def gram_size(n: int) -> int:
    return TERM_COUNT * (n + 1)


@dataclass(frozen=True, eq=False)
class ReducedBasis:
    vectors: np.ndarray  # (N, n_nodes), orthonormal in the reference seminorm
    reduced_stiffness: np.ndarray  # (18, N, N)
    reduced_loads: np.ndarray  # (18, N): xi G_q
    gram: np.ndarray  # (18 + 18 N, 18 + 18 N)
    riesz_factor: np.ndarray  # upper triangular R with gram = R^T R
    provenance: Tuple[Selection, ...]
    box: ParameterBox
    n_per_side: int
    mesh_fingerprint: bytes
    seed: int = 0
    trace: Tuple[float, ...] = field(default_factory=tuple)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dofs(self) -> int:
        return self.vectors.shape[1]

    def truncated(self, n: int) -> "ReducedBasis":
        """The nested basis spanned by the first n vectors."""
        if not 0 <= n <= self.size:
            raise ValueError(f"cannot truncate a basis of size {self.size} to {n}")
        m = gram_size(n)
        return replace(
            self,
            vectors=self.vectors[:n],
            reduced_stiffness=self.reduced_stiffness[:, :n, :n],
            reduced_loads=self.reduced_loads[:, :n],
            gram=self.gram[:m, :m],
            riesz_factor=self.riesz_factor[:m, :m],
            provenance=self.provenance[:n],
            trace=self.trace[:n],
        )

    def reduced_matrix(self, coeffs: AffineCoeffs) -> np.ndarray:
        return np.tensordot(coeffs.stiffness_terms, self.reduced_stiffness, axes=1)

    def reduced_rhs(self, coeffs: AffineCoeffs) -> np.ndarray:
        """Reduced loads F^N_i = -sum_k chat_{k,i} xi G_{k,i}, stacked as (2, N)."""
        return np.stack([-(coeffs.load[:, axis] @ self.reduced_loads[axis::2]) for axis in range(2)])

    def theta_vector(self, coeffs: AffineCoeffs, reduced: np.ndarray, direction: int) -> np.ndarray:
        """Weights of the residual of one direction over the representer layout."""
        theta = np.zeros(gram_size(self.size))
        theta[direction - 1 : TERM_COUNT : 2] = coeffs.load[:, direction - 1]
        stiffness = coeffs.stiffness_terms
        theta[TERM_COUNT:] = -np.outer(reduced, stiffness).ravel()
        return theta

    def reconstruct(self, reduced: np.ndarray) -> np.ndarray:
        """Full FE vector(s) from reduced coefficients."""
        return np.asarray(reduced) @ self.vectors

    def check_system(self, system: AffineSystem):
        if system.fingerprint != self.mesh_fingerprint:
            raise MeshMismatchError(
                f"basis built on n_per_side={self.n_per_side} does not match the system "
                f"on n_per_side={system.mesh.n_per_side}"
            )

    def orthonormality_error(self, system: AffineSystem) -> float:
        if not self.size:
            return 0.0
        inner = self.vectors @ (system.laplacian @ self.vectors.T)
        return float(np.abs(inner - np.eye(self.size)).max())

    def verify(self, system: AffineSystem, tol: float = 1e-10):
        self.check_system(system)
        error = self.orthonormality_error(system)
        if error > tol:
            raise BasisFileError(f"basis vectors are not orthonormal: max deviation {error:.3e}")


class BasisBuilder:
    """Appends snapshots with Gram-Schmidt in the reference inner product and keeps all offline data current."""

    def __init__(self, system: AffineSystem):
        self.system = system
        self.vectors: List[np.ndarray] = []
        self.images: List[np.ndarray] = []  # (18, n_nodes) rows M_q xi_n
        self.representers = system.riesz(-system.load_blocks.T)  # (n_nodes, 18)
        self.gram = self._inner(self.representers, self.representers)
        self.riesz_basis = np.zeros((system.size, 0))
        self.riesz_factor = np.zeros((0, 0))
        self._extend_factor(self.representers)

    def _inner(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        return left.T @ (self.system.laplacian @ right)

    @property
    def size(self) -> int:
        return len(self.vectors)

    def _extend_factor(self, columns: np.ndarray):
        """Append columns to the thin QR factorization of the representers (CGS with reorthogonalization)."""
        laplacian = self.system.laplacian
        start = self.riesz_factor.shape[0]
        count = columns.shape[1]
        basis = np.hstack([self.riesz_basis, np.zeros((columns.shape[0], count))])
        factor = np.zeros((start + count, start + count))
        factor[:start, :start] = self.riesz_factor
        for j in range(count):
            active = basis[:, : start + j]
            remainder = np.array(columns[:, j], dtype=float)
            original = self.system.seminorm(remainder)
            coords = np.zeros(start + j)
            for _ in range(RIESZ_PASSES):
                step = active.T @ (laplacian @ remainder)
                remainder -= active @ step
                coords += step
            norm = self.system.seminorm(remainder)
            factor[: start + j, start + j] = coords
            # numerically dependent representers keep a zero row
            if norm > DEPENDENT_RATIO * original:
                factor[start + j, start + j] = norm
                basis[:, start + j] = remainder / norm
        self.riesz_basis = basis
        self.riesz_factor = factor

    def orthogonalize(self, snapshot: np.ndarray) -> Optional[np.ndarray]:
        """
        Modified Gram-Schmidt remainder of a snapshot, normalized.

        :return: the new basis vector, or None when the snapshot is numerically dependent
        """
        laplacian = self.system.laplacian
        original = self.system.seminorm(snapshot)
        if original < ZERO_SNAPSHOT:
            return None
        remainder = np.array(snapshot, dtype=float)
        for _ in range(2):
            for vector in self.vectors:
                remainder -= (vector @ (laplacian @ remainder)) * vector
            norm = self.system.seminorm(remainder)
            if norm >= REPASS_RATIO * original:
                break
        if norm < DEPENDENT_RATIO * original:
            return None
        return remainder / norm

    def append(self, vector: np.ndarray):
        system = self.system
        images = np.stack([block @ vector for block in system.stiffness_blocks])
        new_representers = system.riesz(images.T)
        cross = self._inner(self.representers, new_representers)
        own = self._inner(new_representers, new_representers)
        gram = np.block([[self.gram, cross], [cross.T, own]])
        self.gram = 0.5 * (gram + gram.T)
        self.representers = np.hstack([self.representers, new_representers])
        self._extend_factor(new_representers)
        self.vectors.append(vector)
        self.images.append(images)

    def build(
        self,
        box: ParameterBox,
        provenance: Tuple[Selection, ...] = (),
        seed: int = 0,
        trace: Tuple[float, ...] = (),
    ) -> ReducedBasis:
        mesh = self.system.mesh
        n = self.size
        vectors = np.array(self.vectors).reshape(n, mesh.node_count)
        if n:
            images = np.array(self.images)  # (N, 18, n_nodes)
            reduced_stiffness = np.einsum("ik,jqk->qij", vectors, images)
            reduced_stiffness = 0.5 * (reduced_stiffness + reduced_stiffness.transpose(0, 2, 1))
        else:
            reduced_stiffness = np.zeros((TERM_COUNT, 0, 0))
        reduced_loads = self.system.load_blocks @ vectors.T
        return ReducedBasis(
            vectors=vectors,
            reduced_stiffness=reduced_stiffness,
            reduced_loads=reduced_loads,
            gram=self.gram.copy(),
            riesz_factor=self.riesz_factor.copy(),
            provenance=tuple(provenance),
            box=box,
            n_per_side=mesh.n_per_side,
            mesh_fingerprint=mesh.fingerprint,
            seed=seed,
            trace=tuple(trace),
        )
