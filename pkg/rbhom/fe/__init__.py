from .assembly import (
    SparseSpd,
    assemble_block_load,
    assemble_block_stiffness,
    assemble_laplacian,
    assemble_mass,
    assemble_neumann_load,
    assemble_tensor_stiffness,
    element_gradients,
)
from .mesh import BLOCK_COUNT, CENTER_BLOCK, MacroMesh, PeriodicMesh, build_macro_mesh, build_periodic_mesh
from .solvers import QuotientConstraint, SpdSolver, h1_semi_inner, solve_spd

__all__ = [
    "BLOCK_COUNT",
    "CENTER_BLOCK",
    "MacroMesh",
    "PeriodicMesh",
    "QuotientConstraint",
    "SparseSpd",
    "SpdSolver",
    "assemble_block_load",
    "assemble_block_stiffness",
    "assemble_laplacian",
    "assemble_mass",
    "assemble_neumann_load",
    "assemble_tensor_stiffness",
    "build_macro_mesh",
    "build_periodic_mesh",
    "element_gradients",
    "h1_semi_inner",
    "solve_spd",
]
