"""Sparse P1 assembly. Gradients are element-wise constant, so every integral is exact."""
from typing import Union

import numpy as np
import scipy.sparse as sp

from rbhom.exceptions import MeshError
from rbhom.fe.mesh import BLOCK_COUNT, MacroMesh, PeriodicMesh

SparseSpd = sp.csr_matrix
AnyMesh = Union[PeriodicMesh, MacroMesh]


def _check_block(block: int, direction: int):
    if not 0 <= block < BLOCK_COUNT:
        raise MeshError(f"block index must lie in 0..{BLOCK_COUNT - 1}, got {block}")
    if direction not in (1, 2):
        raise MeshError(f"direction must be 1 or 2, got {direction}")


def _scatter(mesh: AnyMesh, local: np.ndarray, elements: np.ndarray = None) -> SparseSpd:
    """Sum (n_el, 3, 3) element matrices into a CSR matrix; duplicates are added."""
    connectivity = mesh.elements if elements is None else mesh.elements[elements]
    rows = np.repeat(connectivity, 3, axis=1).ravel()
    cols = np.tile(connectivity, (1, 3)).ravel()
    size = mesh.node_count
    matrix = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(size, size))
    matrix.sum_duplicates()
    return matrix


def assemble_block_stiffness(mesh: PeriodicMesh, block: int, direction: int) -> SparseSpd:
    """Entries int_{block} d_d phi_i d_d phi_j on the reference cell."""
    _check_block(block, direction)
    elements = np.flatnonzero(mesh.block_of_element == block)
    grad = mesh.gradients[elements, :, direction - 1]
    local = mesh.areas[elements, None, None] * grad[:, :, None] * grad[:, None, :]
    return _scatter(mesh, local, elements)


def assemble_block_load(mesh: PeriodicMesh, block: int, direction: int) -> np.ndarray:
    """Vector G with G[l] = int_{block} d_d phi_l on the reference cell."""
    _check_block(block, direction)
    elements = np.flatnonzero(mesh.block_of_element == block)
    contributions = mesh.areas[elements, None] * mesh.gradients[elements, :, direction - 1]
    load = np.zeros(mesh.node_count)
    np.add.at(load, mesh.elements[elements], contributions)
    return load


def assemble_laplacian(mesh: AnyMesh) -> SparseSpd:
    """Single-pass stiffness of the plain Laplacian."""
    local = mesh.areas[:, None, None] * np.einsum("eak,ebk->eab", mesh.gradients, mesh.gradients)
    return _scatter(mesh, local)


def assemble_tensor_stiffness(mesh: AnyMesh, tensors: np.ndarray) -> SparseSpd:
    """Stiffness of div(A grad u) with one constant 2x2 tensor per element."""
    tensors = np.asarray(tensors, dtype=float)
    if tensors.shape != (mesh.element_count, 2, 2):
        raise MeshError(
            f"expected one 2x2 tensor per element, shape {(mesh.element_count, 2, 2)}, got {tensors.shape}"
        )
    local = mesh.areas[:, None, None] * np.einsum(
        "eak,ekl,ebl->eab", mesh.gradients, tensors, mesh.gradients
    )
    return _scatter(mesh, local)


def assemble_mass(mesh: AnyMesh) -> SparseSpd:
    reference = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = mesh.areas[:, None, None] * reference
    return _scatter(mesh, local)


def assemble_neumann_load(mesh: MacroMesh, flux: float = 1.0) -> np.ndarray:
    """Inflow flux integrated against P1 functions on the Neumann edges."""
    edges = mesh.neumann_edges
    lengths = np.linalg.norm(mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]], axis=1)
    load = np.zeros(mesh.node_count)
    np.add.at(load, edges, 0.5 * flux * lengths[:, None])
    return load


def element_gradients(mesh: AnyMesh, values: np.ndarray) -> np.ndarray:
    """Constant gradient of a P1 field on every element, shape (n_el, 2)."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != mesh.node_count:
        raise MeshError(f"expected {mesh.node_count} nodal values, got {values.shape[-1]}")
    return np.einsum("ea,eak->ek", values[mesh.elements], mesh.gradients)
