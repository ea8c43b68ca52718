"""Cell-parameter fields over the macroscopic domain."""
import importlib
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from rbhom.enums import FieldKind
from rbhom.exceptions import ConfigError, ParameterBoxError, ParameterError
from rbhom.types import REFERENCE_LOWER, REFERENCE_UPPER, CellParam, ParameterBox

BOX_TOLERANCE = 1e-12

FieldHook = Callable[[float, float, ParameterBox], Sequence[float]]


@dataclass(frozen=True)
class ParamField:
    """
    Named map x -> CellParam on [0,1]^2.

    ``default``: b_i = .25 + delta sin(2 pi x_i), c_i = .75 + delta cos(2 pi x_{3-i}),
    theta = -theta0 (x1 + x2) / 2. ``constant``: one parameter everywhere. ``custom``:
    a user function ``fn(x1, x2, box)`` returning (b1, c1, b2, c2, theta).
    """

    kind: FieldKind
    box: ParameterBox
    constant: Optional[CellParam] = None
    hook: Optional[FieldHook] = None
    name: str = "default"

    def raw(self, x: Sequence[float]) -> np.ndarray:
        x1, x2 = float(x[0]), float(x[1])
        if self.kind == FieldKind.CONSTANT:
            return self.constant.as_array()
        if self.kind == FieldKind.CUSTOM:
            return np.asarray(self.hook(x1, x2, self.box), dtype=float)
        d, t0 = self.box.delta, self.box.theta0
        return np.array(
            [
                REFERENCE_LOWER + d * np.sin(2 * np.pi * x1),
                REFERENCE_UPPER + d * np.cos(2 * np.pi * x2),
                REFERENCE_LOWER + d * np.sin(2 * np.pi * x2),
                REFERENCE_UPPER + d * np.cos(2 * np.pi * x1),
                -t0 * (x1 + x2) / 2.0,
            ]
        )

    def __call__(self, x: Sequence[float]) -> CellParam:
        return eval_param_field(self, x)

    def sweep(self, points: np.ndarray) -> List[CellParam]:
        """Evaluate and box-check the field on every point."""
        return [eval_param_field(self, point) for point in np.atleast_2d(points)]


def eval_param_field(field: ParamField, x: Sequence[float]) -> CellParam:
    values = field.raw(x)
    lower, upper = field.box.lower, field.box.upper
    if np.any(values < lower - BOX_TOLERANCE) or np.any(values > upper + BOX_TOLERANCE):
        raise ParameterBoxError(
            f"field '{field.name}' leaves the parameter box at x=({x[0]:.4f}, {x[1]:.4f}): "
            f"(b1,c1,b2,c2,theta)={tuple(round(float(v), 6) for v in values)}"
        )
    try:
        return CellParam.from_array(values)
    except ParameterError as exc:
        raise ParameterBoxError(f"field '{field.name}' gives an invalid parameter at x={tuple(x)}: {exc}") from exc


def _load_hook(target: str) -> FieldHook:
    module_name, _, attr = target.rpartition(":")
    if not module_name or not attr:
        raise ConfigError(f"custom field must be given as 'custom:module:function', got 'custom:{target}'")
    try:
        return getattr(importlib.import_module(module_name), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"cannot load custom field {target}: {exc}") from exc


def field_from_spec(spec: str, box: ParameterBox) -> ParamField:
    """
    Parse a field identifier.

    Accepted forms: ``default``; ``constant`` (reference geometry, theta = -theta0);
    ``constant:b1,c1,b2,c2,theta``; ``custom:module:function``.
    """
    spec = spec.strip()
    kind_name, _, rest = spec.partition(":")
    try:
        kind = FieldKind(kind_name.lower())
    except ValueError as exc:
        raise ConfigError(f"unknown field '{spec}', expected default, constant or custom") from exc

    if kind == FieldKind.DEFAULT:
        return ParamField(kind=kind, box=box, name=spec)
    if kind == FieldKind.CONSTANT:
        if rest:
            try:
                values = [float(v) for v in rest.split(",")]
            except ValueError as exc:
                raise ConfigError(f"constant field needs five numbers, got '{rest}'") from exc
            if len(values) != 5:
                raise ConfigError(f"constant field needs five numbers, got {len(values)}")
            param = CellParam.from_array(values)
        else:
            param = CellParam.reference(theta=-box.theta0)
        return ParamField(kind=kind, box=box, constant=param, name=spec)
    return ParamField(kind=kind, box=box, hook=_load_hook(rest), name=spec)
