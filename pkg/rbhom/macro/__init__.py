from .corrector import CorrectorField, reconstruct_corrector, sample_grid
from .fields import ParamField, eval_param_field, field_from_spec
from .providers import CoefficientProvider, ElementCoefficients, RBProvider, TruthProvider, make_provider
from .solver import (
    POINCARE,
    HomogenizedRun,
    MacroComparison,
    MacroSystem,
    assemble_homogenized,
    compare_macro,
    run_homogenized,
    solve_macro,
)

__all__ = [
    "POINCARE",
    "CoefficientProvider",
    "CorrectorField",
    "ElementCoefficients",
    "HomogenizedRun",
    "MacroComparison",
    "MacroSystem",
    "ParamField",
    "RBProvider",
    "TruthProvider",
    "assemble_homogenized",
    "compare_macro",
    "eval_param_field",
    "field_from_spec",
    "make_provider",
    "reconstruct_corrector",
    "run_homogenized",
    "sample_grid",
    "solve_macro",
]
