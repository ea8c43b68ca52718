from enum import Enum, auto


class AutoEnum(str, Enum):
    # noinspection PyMethodParameters,PyTypeChecker
    def _generate_next_value_(name, start, count, last_values) -> str:  # type: ignore
        """
        Uses the lower-cased name as the automatic value, so members round-trip
        through config files and CSV columns unchanged.
        """
        return name.lower()


class CoefficientSource(AutoEnum):
    """Where homogenized tensors come from."""

    TRUTH = auto()
    RB = auto()


class FieldKind(AutoEnum):
    """How the cell parameter varies over the macroscopic domain."""

    DEFAULT = auto()
    CONSTANT = auto()
    CUSTOM = auto()


class SolverMethod(AutoEnum):
    """Linear solver used for the high-fidelity systems."""

    DIRECT = auto()
    CG = auto()


class Orientation(AutoEnum):
    """Triangle position inside its mesh square."""

    LOWER = auto()
    UPPER = auto()
