"""
Basis container file.

Layout (little-endian): magic ``RBHOM001``; header u32 version, u32 n_per_side, u32 N,
10 f64 parameter box (lower then upper corner), u32 provenance length, u64 training
seed, 32-byte mesh fingerprint; then f64 payloads in order: vectors (N x n_nodes),
reduced stiffness (18 x N x N), reduced loads (18 x N), Gram matrix, representer
factor R (same shape, upper triangular), provenance rows
(param_id, b1, c1, b2, c2, theta, direction, bound), greedy trace (N values).
"""
import hashlib
import logging
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from rbhom.cell_problem import TERM_COUNT, AffineSystem
from rbhom.exceptions import BasisFileError, ConfigError, FingerprintMismatchError
from rbhom.rb.basis import ReducedBasis, Selection, gram_size
from rbhom.types import REFERENCE_LOWER, CellParam, ParameterBox

logger = logging.getLogger(__name__)

MAGIC = b"RBHOM001"
VERSION = 2
_HEADER = struct.Struct("<III10dIQ32s")
_PROVENANCE_WIDTH = 8
_F64 = np.dtype("<f8")


def _payloads(basis: ReducedBasis) -> bytes:
    provenance = np.array(
        [
            [s.param_id, *s.param.as_array(), s.direction, s.bound]
            for s in basis.provenance
        ],
        dtype=float,
    ).reshape(len(basis.provenance), _PROVENANCE_WIDTH)
    trace = np.zeros(basis.size)
    trace[: len(basis.trace)] = basis.trace[: basis.size]
    parts = [
        basis.vectors,
        basis.reduced_stiffness,
        basis.reduced_loads,
        basis.gram,
        basis.riesz_factor,
        provenance,
        trace,
    ]
    return b"".join(np.ascontiguousarray(part, dtype=_F64).tobytes() for part in parts)


def basis_fingerprint(basis: ReducedBasis) -> str:
    """Content hash of the dense payloads, hex sha1 like a git object id."""
    return hashlib.sha1(_payloads(basis)).hexdigest()


def save_basis(basis: ReducedBasis, path: Union[str, Path]) -> Path:
    path = Path(path)
    box = basis.box
    header = _HEADER.pack(
        VERSION,
        basis.n_per_side,
        basis.size,
        *box.lower,
        *box.upper,
        len(basis.provenance),
        basis.seed,
        basis.mesh_fingerprint,
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(MAGIC + header + _payloads(basis))
    logger.info(f"saved basis N={basis.size} to {path}")
    return path


class _Reader:
    def __init__(self, data: bytes, offset: int):
        self.data = data
        self.offset = offset

    def take(self, *shape: int) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        end = self.offset + count * _F64.itemsize
        if end > len(self.data):
            raise BasisFileError(f"basis file truncated: needed {end} bytes, have {len(self.data)}")
        values = np.frombuffer(self.data, dtype=_F64, count=count, offset=self.offset).reshape(shape)
        self.offset = end
        return values.astype(float)


def load_basis(path: Union[str, Path], system: Optional[AffineSystem] = None) -> ReducedBasis:
    """
    Read a basis container.

    :param system: when given, the stored mesh fingerprint must match and orthonormality is re-verified
    :raises BasisFileError: bad magic, unsupported version, truncated or inconsistent payloads
    :raises FingerprintMismatchError: basis built on a different mesh than ``system``
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise BasisFileError(f"cannot read basis file {path}: {exc}") from exc
    if data[: len(MAGIC)] != MAGIC:
        raise BasisFileError(f"{path} is not a basis file (bad magic)")
    if len(data) < len(MAGIC) + _HEADER.size:
        raise BasisFileError(f"basis file {path} truncated inside the header")
    fields = _HEADER.unpack_from(data, len(MAGIC))
    version, n_per_side, n = fields[:3]
    lower, upper = np.array(fields[3:8]), np.array(fields[8:13])
    provenance_length, seed, mesh_fingerprint = fields[13:]
    if version != VERSION:
        raise BasisFileError(f"unsupported basis file version {version}, expected {VERSION}")
    if system is not None and system.fingerprint != mesh_fingerprint:
        raise FingerprintMismatchError(
            f"basis in {path} was built on n_per_side={n_per_side}, system uses n_per_side={system.mesh.n_per_side}"
        )

    n_nodes = n_per_side * n_per_side
    reader = _Reader(data, len(MAGIC) + _HEADER.size)
    vectors = reader.take(n, n_nodes)
    reduced_stiffness = reader.take(TERM_COUNT, n, n)
    reduced_loads = reader.take(TERM_COUNT, n)
    gram = reader.take(gram_size(n), gram_size(n))
    riesz_factor = reader.take(gram_size(n), gram_size(n))
    provenance_rows = reader.take(provenance_length, _PROVENANCE_WIDTH)
    trace = reader.take(n)
    if reader.offset != len(data):
        raise BasisFileError(f"basis file {path} has {len(data) - reader.offset} trailing bytes")

    try:
        box = ParameterBox(delta=round(upper[0] - REFERENCE_LOWER, 12), theta0=round(-lower[4], 12) + 0.0)
        provenance = tuple(
            Selection(int(row[0]), CellParam.from_array(row[1:6]), int(row[6]), float(row[7]))
            for row in provenance_rows
        )
    except (ValueError, ConfigError) as exc:
        raise BasisFileError(f"basis file {path} has an invalid header or provenance: {exc}") from exc

    basis = ReducedBasis(
        vectors=vectors,
        reduced_stiffness=reduced_stiffness,
        reduced_loads=reduced_loads,
        gram=gram,
        riesz_factor=riesz_factor,
        provenance=provenance,
        box=box,
        n_per_side=n_per_side,
        mesh_fingerprint=mesh_fingerprint,
        seed=seed,
        trace=tuple(float(v) for v in trace),
    )
    if system is not None:
        basis.verify(system)
    return basis
