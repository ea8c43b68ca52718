"""Sources of homogenized tensors and cell functions for the macroscopic problem."""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from rbhom.cell_problem import AffineSystem, homogenized_tensor, solve_cell
from rbhom.enums import CoefficientSource
from rbhom.exceptions import EmptyBasisError, ProviderError
from rbhom.rb.basis import ReducedBasis
from rbhom.rb.online import online_solve
from rbhom.types import CellParam
from rbhom.utils import parallel_map


@dataclass(frozen=True)
class ElementCoefficients:
    a_star: np.ndarray  # (m, 2, 2)
    delta_s: np.ndarray  # (m, 2, 2), zero for the truth source
    fe_solves: int


class CoefficientProvider(ABC):
    """Answers one homogenized-tensor query per macro element."""

    source: CoefficientSource

    @abstractmethod
    def query(self, param: CellParam) -> Tuple[np.ndarray, np.ndarray]:
        """a_star and its entrywise bound delta_s."""
        raise NotImplementedError

    @abstractmethod
    def cell_functions(self, param: CellParam) -> np.ndarray:
        """Both cell functions (2, n_nodes) on the reference mesh."""
        raise NotImplementedError

    def tensors(self, params: Sequence[CellParam], workers: int = 1) -> ElementCoefficients:
        def run(item):
            element, param = item
            try:
                return self.query(param)
            except Exception as exc:  # re-raised with the element id
                raise ProviderError(element, exc) from exc

        results = parallel_map(run, list(enumerate(params)), workers)
        a_star = np.array([r[0] for r in results]).reshape(len(params), 2, 2)
        delta_s = np.array([r[1] for r in results]).reshape(len(params), 2, 2)
        solves = len(params) if self.source == CoefficientSource.TRUTH else 0
        return ElementCoefficients(a_star=a_star, delta_s=delta_s, fe_solves=solves)


class TruthProvider(CoefficientProvider):
    source = CoefficientSource.TRUTH

    def __init__(self, system: AffineSystem):
        self.system = system

    def query(self, param: CellParam):
        tensor = homogenized_tensor(self.system, solve_cell(self.system, param))
        return tensor.a_star, np.zeros((2, 2))

    def cell_functions(self, param: CellParam) -> np.ndarray:
        return solve_cell(self.system, param).w


class RBProvider(CoefficientProvider):
    source = CoefficientSource.RB

    def __init__(self, basis: ReducedBasis, system: AffineSystem):
        if basis.size == 0:
            raise EmptyBasisError("the rb provider needs a non-empty basis")
        basis.check_system(system)
        self.basis = basis
        self.system = system

    def query(self, param: CellParam):
        result = online_solve(self.basis, param)
        return result.a_star, result.delta_s

    def cell_functions(self, param: CellParam) -> np.ndarray:
        return self.basis.reconstruct(online_solve(self.basis, param).w)


def make_provider(
    source: CoefficientSource, system: AffineSystem, basis: Optional[ReducedBasis] = None
) -> CoefficientProvider:
    if CoefficientSource(source) == CoefficientSource.TRUTH:
        return TruthProvider(system)
    if basis is None:
        raise EmptyBasisError("the rb provider needs a basis file")
    return RBProvider(basis, system)

