"""
Five-parameter inclusion model mapped onto the fixed reference cell.

The reference cell is split by the lines 0.25 and 0.75 in each direction into a 3x3
grid of blocks, block k = bx + 3*by. A parameter moves those lines to b_i and c_i; on
each block the map is a diagonal affine stretch, so the pulled-back coefficient is a
per-block diagonal tensor and the bilinear form is an exact sum of 18 scalar-weighted
block forms.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from rbhom.fe.mesh import BLOCK_COUNT, BLOCK_LINES, CENTER_BLOCK
from rbhom.types import CellParam, ParameterBox

_BLOCK_X = np.arange(BLOCK_COUNT) % 3
_BLOCK_Y = np.arange(BLOCK_COUNT) // 3
_REFERENCE_EDGES = np.array([0.0, *BLOCK_LINES, 1.0])


def _axis_intervals(b: float, c: float) -> Tuple[np.ndarray, np.ndarray]:
    """Scale and offset of the three intervals along one axis."""
    physical = np.array([0.0, b, c, 1.0])
    scales = np.diff(physical) / np.diff(_REFERENCE_EDGES)
    offsets = physical[:-1] - scales * _REFERENCE_EDGES[:-1]
    return scales, offsets


@dataclass(frozen=True)
class BlockMap:
    """Piecewise diagonal-affine homeomorphism of the cell, y = offset_k + j_k * yhat on block k."""

    scales: np.ndarray  # (9, 2)
    offsets: np.ndarray  # (9, 2)
    lines: np.ndarray  # (2, 2): physical block lines [[b1, c1], [b2, c2]]

    @property
    def det(self) -> np.ndarray:
        return self.scales[:, 0] * self.scales[:, 1]

    def forward(self, points: np.ndarray) -> np.ndarray:
        """Reference points to physical points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        bx = np.searchsorted(BLOCK_LINES, points[:, 0], side="right")
        by = np.searchsorted(BLOCK_LINES, points[:, 1], side="right")
        block = bx + 3 * by
        return self.offsets[block] + self.scales[block] * points

    def inverse(self, points: np.ndarray) -> np.ndarray:
        """Physical points to reference points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        bx = np.searchsorted(self.lines[0], points[:, 0], side="right")
        by = np.searchsorted(self.lines[1], points[:, 1], side="right")
        block = bx + 3 * by
        return (points - self.offsets[block]) / self.scales[block]


@dataclass(frozen=True)
class AffineCoeffs:
    """
    Per-block scalar weights of the pulled-back cell problem.

    ``stiffness[k, d-1]`` multiplies the block form int_k d_d u d_d v and ``load[k, i-1]``
    multiplies int_k d_i v in the load for direction i. The two means are those of the
    physical scalar coefficient and bracket the homogenized tensor.
    """

    stiffness: np.ndarray  # (9, 2)
    load: np.ndarray  # (9, 2)
    volume: np.ndarray  # (9,)
    arithmetic_mean: float
    harmonic_mean: float

    @property
    def stiffness_terms(self) -> np.ndarray:
        """Flat weights in affine-term order q = 2k + (d-1)."""
        return self.stiffness.ravel()

    @property
    def alpha(self) -> float:
        return float(self.stiffness.min())

    @property
    def gamma(self) -> float:
        return float(self.stiffness.max())

    @property
    def mean(self) -> np.ndarray:
        return self.arithmetic_mean * np.eye(2)


def block_map(param: CellParam) -> BlockMap:
    sx, ox = _axis_intervals(param.b1, param.c1)
    sy, oy = _axis_intervals(param.b2, param.c2)
    scales = np.stack([sx[_BLOCK_X], sy[_BLOCK_Y]], axis=1)
    offsets = np.stack([ox[_BLOCK_X], oy[_BLOCK_Y]], axis=1)
    lines = np.array([[param.b1, param.c1], [param.b2, param.c2]])
    return BlockMap(scales=scales, offsets=offsets, lines=lines)


def _contrast(theta: float, blocks) -> np.ndarray:
    contrast = np.ones(BLOCK_COUNT)
    contrast[list(blocks)] += theta
    return contrast


def harmonic_mean(param: CellParam) -> float:
    """Reuss bound (|Q|/(1+theta) + 1 - |Q|)^-1 of the physical coefficient."""
    area = param.inclusion_area
    return 1.0 / (area / (1.0 + param.theta) + 1.0 - area)


def mean_coefficient(param: CellParam) -> np.ndarray:
    """Cell average (1 + theta |Q|) I of the physical coefficient."""
    return (1.0 + param.theta * param.inclusion_area) * np.eye(2)


def affine_coeffs(param: CellParam) -> AffineCoeffs:
    mapping = block_map(param)
    det = mapping.det
    contrast = _contrast(param.theta, [CENTER_BLOCK])
    stiffness = (det[:, None] / mapping.scales**2) * contrast[:, None]
    load = (det[:, None] / mapping.scales) * contrast[:, None]
    return AffineCoeffs(
        stiffness=stiffness,
        load=load,
        volume=det,
        arithmetic_mean=1.0 + param.theta * param.inclusion_area,
        harmonic_mean=harmonic_mean(param),
    )


def coercivity_bounds(param: CellParam) -> Tuple[float, float]:
    """(alpha, gamma) of the mapped form against the reference H1 seminorm."""
    coeffs = affine_coeffs(param)
    return coeffs.alpha, coeffs.gamma


def laminate_coeffs(theta: float) -> AffineCoeffs:
    """Horizontal strip y2 in [.25,.75] with coefficient 1+theta on the undeformed cell."""
    contrast = _contrast(theta, [3, 4, 5])
    weights = np.repeat(contrast[:, None], 2, axis=1)
    return AffineCoeffs(
        stiffness=weights,
        load=weights.copy(),
        volume=np.ones(BLOCK_COUNT),
        arithmetic_mean=1.0 + 0.5 * theta,
        harmonic_mean=1.0 / (0.5 / (1.0 + theta) + 0.5),
    )


def box_coercivity_bounds(box: ParameterBox) -> Tuple[float, float]:
    """
    Worst-case (alpha, gamma) over the parameter box.

    Each weight is a product of positive factors that are monotone in separate
    coordinates, so the extremes are attained at the 32 corners.
    """
    weights = np.array([affine_coeffs(corner).stiffness for corner in box.corners()])
    return float(weights.min()), float(weights.max())
