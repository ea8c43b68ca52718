import itertools
from typing import Annotated, List, Tuple

import numpy as np
from pydantic import AfterValidator, BaseModel, ConfigDict, Field, field_validator, model_validator

from .enums import SolverMethod
from .exceptions import ParameterError

REFERENCE_LOWER = 0.25
REFERENCE_UPPER = 0.75


class CellParam(BaseModel):
    """Inclusion geometry and contrast: Q = [b1,c1] x [b2,c2], coefficient 1+theta inside."""

    b1: float
    c1: float
    b2: float
    c2: float
    theta: float
    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_geometry(self):
        for axis, (b, c) in enumerate(((self.b1, self.c1), (self.b2, self.c2)), start=1):
            if not (0.0 < b < c < 1.0):
                raise ParameterError(
                    f"degenerate inclusion along y{axis}: need 0 < b{axis} < c{axis} < 1, "
                    f"got b{axis}={b}, c{axis}={c}"
                )
        if not (-1.0 < self.theta <= 0.0):
            raise ParameterError(f"theta must lie in (-1, 0], got {self.theta}")
        return self

    @classmethod
    def from_array(cls, values) -> "CellParam":
        b1, c1, b2, c2, theta = (float(v) for v in values)
        return cls(b1=b1, c1=c1, b2=b2, c2=c2, theta=theta)

    @classmethod
    def reference(cls, theta: float = 0.0) -> "CellParam":
        return cls(
            b1=REFERENCE_LOWER,
            c1=REFERENCE_UPPER,
            b2=REFERENCE_LOWER,
            c2=REFERENCE_UPPER,
            theta=theta,
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.b1, self.c1, self.b2, self.c2, self.theta], dtype=float)

    @property
    def lower(self) -> Tuple[float, float]:
        return self.b1, self.b2

    @property
    def upper(self) -> Tuple[float, float]:
        return self.c1, self.c2

    @property
    def inclusion_area(self) -> float:
        return (self.c1 - self.b1) * (self.c2 - self.b2)


def _check_delta(value: float) -> float:
    if not (0.0 < value < 0.25):
        raise ValueError("delta must lie in (0, 0.25)")
    return value


def _check_theta0(value: float) -> float:
    if not (0.0 <= value < 1.0):
        raise ValueError("theta0 must lie in [0, 1)")
    return value


Delta = Annotated[float, AfterValidator(_check_delta)]
Theta0 = Annotated[float, AfterValidator(_check_theta0)]


class ParameterBox(BaseModel):
    """Admissible box [.25-d,.25+d]^2 x [.75-d,.75+d]^2 x [-theta0, 0]."""

    delta: Delta = 0.1
    theta0: Theta0 = 0.99
    model_config = ConfigDict(frozen=True)

    @property
    def lower(self) -> np.ndarray:
        d = self.delta
        return np.array(
            [REFERENCE_LOWER - d, REFERENCE_UPPER - d, REFERENCE_LOWER - d, REFERENCE_UPPER - d, -self.theta0]
        )

    @property
    def upper(self) -> np.ndarray:
        d = self.delta
        return np.array(
            [REFERENCE_LOWER + d, REFERENCE_UPPER + d, REFERENCE_LOWER + d, REFERENCE_UPPER + d, 0.0]
        )

    def contains(self, param: CellParam, tol: float = 1e-12) -> bool:
        values = param.as_array()
        return bool(np.all(values >= self.lower - tol) and np.all(values <= self.upper + tol))

    def corners(self) -> List[CellParam]:
        lows, highs = self.lower, self.upper
        return [
            CellParam.from_array([highs[i] if pick else lows[i] for i, pick in enumerate(choice)])
            for choice in itertools.product((False, True), repeat=5)
        ]


class SampleSpec(BaseModel):
    """Seeded uniform sample over a parameter box."""

    seed: int = Field(ge=0, lt=2**64)
    count: int = Field(ge=0)
    box: ParameterBox = ParameterBox()
    model_config = ConfigDict(frozen=True)


class RunConfig(BaseModel):
    """Everything a harness run needs."""

    n_per_side: int = 12
    delta: Delta = 0.1
    theta0: Theta0 = 0.99
    p: int = Field(default=50, ge=1)
    n_max: int = Field(default=40, ge=1)
    rel_tol: float = Field(default=1e-8, ge=0.0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    h_hom: float = Field(default=0.03, gt=0.0, le=1.0)
    epsilon: float = Field(default=0.02, gt=0.0)
    field: str = "default"
    out_dir: str = "out"
    solver: SolverMethod = SolverMethod.DIRECT
    corrector_resolution: int = Field(default=200, ge=2)
    workers: int = Field(default=1, ge=1)
    bench_repeats: int = Field(default=5, ge=5)
    bench_sizes: Tuple[int, ...] = (8, 16, 32)
    model_config = ConfigDict(frozen=True, extra="forbid", use_enum_values=False)

    @field_validator("n_per_side")
    @classmethod
    def check_n_per_side(cls, value: int) -> int:
        if value < 4 or value % 4:
            raise ValueError("n_per_side must be a positive multiple of 4")
        return value

    @field_validator("bench_sizes", mode="before")
    @classmethod
    def split_sizes(cls, value):
        if isinstance(value, str):
            value = [v for v in value.replace(";", ",").split(",") if v.strip()]
        sizes = tuple(int(v) for v in value)
        for size in sizes:
            if size < 4 or size % 4:
                raise ValueError("bench_sizes entries must be positive multiples of 4")
        return sizes

    @property
    def box(self) -> ParameterBox:
        return ParameterBox(delta=self.delta, theta0=self.theta0)

    @property
    def n_hom(self) -> int:
        return max(1, int(round(1.0 / self.h_hom)))

    def train_spec(self) -> SampleSpec:
        return SampleSpec(seed=self.seed, count=self.p, box=self.box)

    def test_spec(self) -> SampleSpec:
        return SampleSpec(seed=(self.seed + 1) % 2**64, count=self.p, box=self.box)

    def echo(self) -> List[str]:
        lines = []
        for key, value in self.model_dump().items():
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif hasattr(value, "value"):
                value = value.value
            lines.append(f"{key}={value}")
        return lines
