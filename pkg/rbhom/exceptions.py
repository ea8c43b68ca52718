from typing import Any, Optional


class RBHomError(Exception):
    """Generic toolkit error."""


class ConfigError(RBHomError):
    """Invalid configuration or input value."""


class ParameterError(ConfigError):
    """Cell parameter violates the geometry or ellipticity constraints."""


class ParameterBoxError(ConfigError):
    """A parameter field leaves the admissible parameter box."""


class MeshError(ConfigError):
    """Invalid mesh request or mismatched vector dimensions."""


class MeshMismatchError(MeshError):
    """Two objects were built on different meshes."""


class NumericalError(RBHomError):
    """Generic numerical failure."""


class SolverConvergenceError(NumericalError):
    """Linear solve did not meet its residual contract."""

    def __init__(self, message: str, residual: float, iterations: Optional[int] = None):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class IncompatibleRhsError(NumericalError):
    """Right-hand side is not orthogonal to the constants."""


class ReducedSystemError(NumericalError):
    """Reduced stiffness matrix is not symmetric positive definite."""


class EmptyBasisError(NumericalError):
    """Online query against a basis without vectors."""


class ProviderError(NumericalError):
    """Coefficient provider failed on a macro element."""

    def __init__(self, element: int, cause: BaseException):
        super().__init__(f"coefficient query failed on element {element}: {cause}")
        self.element = element
        self.cause = cause


class BasisFileError(NumericalError):
    """Corrupt, truncated or incompatible basis container."""


class FingerprintMismatchError(BasisFileError):
    """Basis was built on a different mesh than the requested system."""


class BoundViolationError(RBHomError):
    """A certified error bound was found smaller than the true error."""

    def __init__(self, message: str, entry: Any = None):
        super().__init__(message)
        self.entry = entry
