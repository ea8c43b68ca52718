"""
Homogenized macroscopic problem on [0,1]^2.

-div(A* grad u) = 0 with u = 0 on {x1=1} u {x2=1} and unit inflow flux on {x1=0} u {x2=0}.
A* is queried once per element at its barycenter, which is exact for P1 stiffness with
an element-wise constant tensor.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse as sp

from rbhom.enums import CoefficientSource, SolverMethod
from rbhom.exceptions import MeshMismatchError
from rbhom.fe import (
    MacroMesh,
    SpdSolver,
    assemble_laplacian,
    assemble_mass,
    assemble_neumann_load,
    assemble_tensor_stiffness,
)
from rbhom.macro.fields import ParamField
from rbhom.macro.providers import CoefficientProvider, ElementCoefficients
from rbhom.types import CellParam
from rbhom.utils import timed

logger = logging.getLogger(__name__)

# exact Poincare constant for functions vanishing on two adjacent sides of the unit square
POINCARE = np.sqrt(2.0) / np.pi
INFLOW_FLUX = 1.0


@dataclass(frozen=True, eq=False)
class MacroSystem:
    mesh: MacroMesh
    stiffness: sp.csr_matrix
    rhs: np.ndarray
    params: List[CellParam]
    coefficients: ElementCoefficients
    query_time: float


@dataclass(frozen=True, eq=False)
class HomogenizedRun:
    mesh: MacroMesh
    u_star: np.ndarray
    a_star: np.ndarray
    delta_s: np.ndarray
    params: List[CellParam]
    source: CoefficientSource
    fe_solves: int
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def max_delta_s(self) -> float:
        """Global tensor error indicator: max over elements of max_ij delta_s_ij."""
        return float(self.delta_s.max()) if self.delta_s.size else 0.0


@dataclass(frozen=True)
class MacroComparison:
    l2_err: float
    h1_err: float
    indicator: Optional[float] = None
    rigorous_bound: Optional[float] = None
    alpha: Optional[float] = None
    gamma_star: Optional[float] = None
    delta_a: Optional[float] = None


def assemble_homogenized(
    mesh: MacroMesh, field: ParamField, provider: CoefficientProvider, workers: int = 1
) -> MacroSystem:
    params = field.sweep(mesh.barycenters())
    coefficients, query_time = timed(lambda: provider.tensors(params, workers))
    tensors = 0.5 * (coefficients.a_star + coefficients.a_star.transpose(0, 2, 1))
    logger.debug(f"{provider.source.value} coefficients for {len(params)} elements in {query_time:.3f}s")
    return MacroSystem(
        mesh=mesh,
        stiffness=assemble_tensor_stiffness(mesh, tensors),
        rhs=assemble_neumann_load(mesh, INFLOW_FLUX),
        params=params,
        coefficients=coefficients,
        query_time=query_time,
    )


def solve_macro(
    system: MacroSystem, method: SolverMethod = SolverMethod.DIRECT, rel_tol: float = 1e-12
) -> np.ndarray:
    """Dirichlet nodes are eliminated and returned as zero."""
    fixed = np.flatnonzero(system.mesh.dirichlet)
    solver = SpdSolver(system.stiffness, fixed=fixed, method=method, rel_tol=rel_tol)
    rhs = system.rhs.copy()
    rhs[fixed] = 0.0
    return solver.solve(rhs)


def run_homogenized(
    mesh: MacroMesh,
    field: ParamField,
    provider: CoefficientProvider,
    workers: int = 1,
    method: SolverMethod = SolverMethod.DIRECT,
) -> HomogenizedRun:
    system, assembly_time = timed(lambda: assemble_homogenized(mesh, field, provider, workers))
    u_star, solve_time = timed(lambda: solve_macro(system, method))
    return HomogenizedRun(
        mesh=mesh,
        u_star=u_star,
        a_star=system.coefficients.a_star,
        delta_s=system.coefficients.delta_s,
        params=system.params,
        source=provider.source,
        fe_solves=system.coefficients.fe_solves,
        timings={"assembly": assembly_time, "queries": system.query_time, "solve": solve_time},
    )


def compare_macro(
    mesh: MacroMesh, u_truth: np.ndarray, u_rb: np.ndarray, rb_run: Optional[HomogenizedRun] = None
) -> MacroComparison:
    """
    L2 and full H1 norms of u_truth - u_rb, plus the a posteriori indicators when the rb run is given.

    indicator = sqrt((1+P^2) (1/alpha) (dA gamma*/alpha + 1) dA |grad u_rb|^2)
    rigorous  = sqrt(1+P^2) dA |grad u_rb| / alpha
    with dA the max elementwise Frobenius norm of delta_s, gamma* the max spectral norm of
    the rb tensors and alpha = min (1 + theta) over the elements.
    """
    u_truth = np.asarray(u_truth, dtype=float)
    u_rb = np.asarray(u_rb, dtype=float)
    if u_truth.shape != (mesh.node_count,) or u_rb.shape != (mesh.node_count,):
        raise MeshMismatchError(
            f"macro vectors of shape {u_truth.shape} and {u_rb.shape} do not match {mesh.node_count} nodes"
        )
    diff = u_truth - u_rb
    laplacian = assemble_laplacian(mesh)
    l2_sq = max(float(diff @ (assemble_mass(mesh) @ diff)), 0.0)
    grad_sq = max(float(diff @ (laplacian @ diff)), 0.0)
    comparison = dict(l2_err=float(np.sqrt(l2_sq)), h1_err=float(np.sqrt(l2_sq + grad_sq)))
    if rb_run is not None:
        alpha = min(1.0 + param.theta for param in rb_run.params)
        gamma_star = float(np.linalg.norm(rb_run.a_star, ord=2, axis=(1, 2)).max())
        delta_a = float(np.linalg.norm(rb_run.delta_s, axis=(1, 2)).max())
        grad_rb_sq = max(float(u_rb @ (laplacian @ u_rb)), 0.0)
        factor = 1.0 + POINCARE**2
        indicator = np.sqrt(factor * (delta_a * gamma_star / alpha + 1.0) * delta_a * grad_rb_sq / alpha)
        rigorous = np.sqrt(factor) * delta_a * np.sqrt(grad_rb_sq) / alpha
        comparison.update(
            indicator=float(indicator),
            rigorous_bound=float(rigorous),
            alpha=alpha,
            gamma_star=gamma_star,
            delta_a=delta_a,
        )
    return MacroComparison(**comparison)
