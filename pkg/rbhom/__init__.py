from .cell_problem import build_affine_system, homogenized_tensor, solve_cell
from .fe import build_periodic_mesh
from .rb import greedy_build, load_basis, online_solve, save_basis
from .types import CellParam, ParameterBox, RunConfig

__all__ = [
    "__version__",
    "CellParam",
    "ParameterBox",
    "RunConfig",
    "build_affine_system",
    "build_periodic_mesh",
    "greedy_build",
    "homogenized_tensor",
    "load_basis",
    "online_solve",
    "save_basis",
    "solve_cell",
]

__version__ = "0.1.0"
