"""
Uniform P1 triangulations: the periodic unit cell (2-torus) and the macroscopic unit square.

Each mesh square [i h, (i+1) h] x [j h, (j+1) h] is split along its y2 = -y1 diagonal into
a lower triangle (i,j),(i+1,j),(i,j+1) and an upper triangle (i+1,j),(i+1,j+1),(i,j+1).
Element 2*(i + n*j) is the lower one and element 2*(i + n*j) + 1 the upper one.
"""
import hashlib
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from rbhom.enums import Orientation
from rbhom.exceptions import MeshError
from rbhom.types import REFERENCE_LOWER, REFERENCE_UPPER

BLOCK_COUNT = 9
CENTER_BLOCK = 4
BLOCK_LINES = np.array([REFERENCE_LOWER, REFERENCE_UPPER])

_REFERENCE_GRADIENTS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_LOWER_OFFSETS = np.array([[0, 0], [1, 0], [0, 1]])
_UPPER_OFFSETS = np.array([[1, 0], [1, 1], [0, 1]])


def p1_gradients(vertices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Constant P1 basis gradients and areas for a batch of triangles.

    :param vertices: (n_el, 3, 2) vertex coordinates (unwrapped for periodic meshes)
    :return: gradients (n_el, 3, 2) and areas (n_el,)
    """
    edges = np.stack([vertices[:, 1] - vertices[:, 0], vertices[:, 2] - vertices[:, 0]], axis=2)
    det = edges[:, 0, 0] * edges[:, 1, 1] - edges[:, 0, 1] * edges[:, 1, 0]
    inverse = np.linalg.inv(edges)
    gradients = np.einsum("ad,edk->eak", _REFERENCE_GRADIENTS, inverse)
    return gradients, 0.5 * np.abs(det)


def _square_indices(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.tile(np.arange(n), n), np.repeat(np.arange(n), n)


def _triangle_lattice(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Unwrapped integer lattice coordinates (2n^2, 3, 2) and the upper-triangle flags."""
    ii, jj = _square_indices(n)
    corner = np.stack([ii, jj], axis=1)[:, None, :]
    lattice = np.empty((2 * n * n, 3, 2), dtype=int)
    lattice[0::2] = corner + _LOWER_OFFSETS
    lattice[1::2] = corner + _UPPER_OFFSETS
    upper = np.zeros(2 * n * n, dtype=bool)
    upper[1::2] = True
    return lattice, upper


def _barycentric(local: np.ndarray, upper: np.ndarray) -> np.ndarray:
    u, v = local[:, 0], local[:, 1]
    lower_weights = np.stack([1.0 - u - v, u, v], axis=1)
    upper_weights = np.stack([1.0 - v, u + v - 1.0, 1.0 - u], axis=1)
    return np.where(upper[:, None], upper_weights, lower_weights)


def _locate(points: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    scaled = np.asarray(points, dtype=float) * n
    cells = np.clip(np.floor(scaled).astype(int), 0, n - 1)
    local = scaled - cells
    upper = local.sum(axis=1) > 1.0
    elements = 2 * (cells[:, 0] + n * cells[:, 1]) + upper.astype(int)
    return elements, _barycentric(local, upper)


@dataclass(frozen=True, eq=False)
class PeriodicMesh:
    """Uniform triangulation of the unit 2-torus with its 3x3 reference block partition."""

    n_per_side: int
    nodes: np.ndarray
    elements: np.ndarray
    upper: np.ndarray
    block_of_element: np.ndarray
    gradients: np.ndarray
    areas: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / self.n_per_side

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def element_count(self) -> int:
        return len(self.elements)

    def orientation(self, element: int) -> Orientation:
        return Orientation.UPPER if self.upper[element] else Orientation.LOWER

    def barycenters(self) -> np.ndarray:
        lattice, _ = _triangle_lattice(self.n_per_side)
        return lattice.mean(axis=1) * self.h

    @cached_property
    def fingerprint(self) -> bytes:
        digest = hashlib.sha256()
        digest.update(b"periodic-p1")
        digest.update(np.int64(self.n_per_side).tobytes())
        digest.update(np.ascontiguousarray(self.elements, dtype="<i8").tobytes())
        digest.update(np.ascontiguousarray(self.block_of_element, dtype="<i8").tobytes())
        return digest.digest()

    def locate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Element index and barycentric weights of points, wrapped onto the torus."""
        wrapped = np.mod(np.asarray(points, dtype=float), 1.0)
        return _locate(wrapped, self.n_per_side)

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """P1 interpolation of nodal values (last axis = nodes) at the given points."""
        elements, weights = self.locate(points)
        local = np.asarray(values)[..., self.elements[elements]]
        return np.sum(local * weights, axis=-1)


def build_periodic_mesh(n_per_side: int) -> PeriodicMesh:
    if n_per_side < 4 or n_per_side % 4:
        raise MeshError(
            f"n_per_side must be a positive multiple of 4 so block lines fall on mesh lines, got {n_per_side}"
        )
    n = n_per_side
    h = 1.0 / n
    ii, jj = _square_indices(n)
    nodes = np.stack([ii, jj], axis=1) * h

    lattice, upper = _triangle_lattice(n)
    elements = (lattice[:, :, 0] % n) + n * (lattice[:, :, 1] % n)
    gradients, areas = p1_gradients(lattice * h)

    barycenters = lattice.mean(axis=1) * h
    bx = np.searchsorted(BLOCK_LINES, barycenters[:, 0], side="right")
    by = np.searchsorted(BLOCK_LINES, barycenters[:, 1], side="right")
    blocks = bx + 3 * by

    for array in (nodes, elements, upper, blocks, gradients, areas):
        array.setflags(write=False)
    return PeriodicMesh(
        n_per_side=n,
        nodes=nodes,
        elements=elements,
        upper=upper,
        block_of_element=blocks,
        gradients=gradients,
        areas=areas,
    )


@dataclass(frozen=True, eq=False)
class MacroMesh:
    """Uniform triangulation of [0,1]^2 with Dirichlet data on {x1=1} u {x2=1}."""

    n_per_side: int
    nodes: np.ndarray
    elements: np.ndarray
    upper: np.ndarray
    gradients: np.ndarray
    areas: np.ndarray
    dirichlet: np.ndarray
    neumann_edges: np.ndarray
    dirichlet_edges: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / self.n_per_side

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def element_count(self) -> int:
        return len(self.elements)

    @property
    def free_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet)

    def barycenters(self) -> np.ndarray:
        return self.nodes[self.elements].mean(axis=1)

    def locate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return _locate(np.clip(np.asarray(points, dtype=float), 0.0, 1.0), self.n_per_side)

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        elements, weights = self.locate(points)
        local = np.asarray(values)[..., self.elements[elements]]
        return np.sum(local * weights, axis=-1)


def build_macro_mesh(n_per_side: int) -> MacroMesh:
    if n_per_side < 1:
        raise MeshError(f"macro mesh needs at least one square per side, got {n_per_side}")
    n = n_per_side
    h = 1.0 / n
    side = np.arange(n + 1)
    nodes = np.stack([np.tile(side, n + 1), np.repeat(side, n + 1)], axis=1) * h

    lattice, upper = _triangle_lattice(n)
    elements = lattice[:, :, 0] + (n + 1) * lattice[:, :, 1]
    gradients, areas = p1_gradients(lattice * h)

    dirichlet = (np.isclose(nodes[:, 0], 1.0)) | (np.isclose(nodes[:, 1], 1.0))
    k = np.arange(n)
    left = np.stack([(n + 1) * k, (n + 1) * (k + 1)], axis=1)
    bottom = np.stack([k, k + 1], axis=1)
    right = np.stack([n + (n + 1) * k, n + (n + 1) * (k + 1)], axis=1)
    top = np.stack([(n + 1) * n + k, (n + 1) * n + k + 1], axis=1)
    neumann_edges = np.concatenate([left, bottom])
    dirichlet_edges = np.concatenate([right, top])

    for array in (nodes, elements, upper, gradients, areas, dirichlet, neumann_edges, dirichlet_edges):
        array.setflags(write=False)
    return MacroMesh(
        n_per_side=n,
        nodes=nodes,
        elements=elements,
        upper=upper,
        gradients=gradients,
        areas=areas,
        dirichlet=dirichlet,
        neumann_edges=neumann_edges,
        dirichlet_edges=dirichlet_edges,
    )
