"""Binary checkpoints of a single field.

Layout (little endian):

    magic   4s   b"HNLS"
    version u32
    grid    u8   0 = torus, 1 = line
    n       u64
    length  f64  torus period (2*pi) or line half-length L
    t       f64
    p       f64
    payload n * (f64 re, f64 im)
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidField
from .spectral import ComplexField, LineGrid, TorusGrid

MAGIC = b"HNLS"
VERSION = 1
HEADER = struct.Struct("<4sIBQddd")
GRID_TORUS, GRID_LINE = 0, 1


@dataclass(frozen=True)
class Checkpoint:
    field: ComplexField
    t: float
    p: float


def encode(f: ComplexField, t: float, p: float) -> bytes:
    if isinstance(f.grid, TorusGrid):
        kind, length = GRID_TORUS, f.grid.period
    else:
        kind, length = GRID_LINE, f.grid.half_length
    head = HEADER.pack(MAGIC, VERSION, kind, f.grid.n, length, float(t), float(p))
    payload = np.ascontiguousarray(f.values).view("<f8").astype("<f8", copy=False).tobytes()
    return head + payload


def decode(data: bytes) -> Checkpoint:
    if len(data) < HEADER.size:
        raise InvalidField("checkpoint truncated before the header ends")
    magic, version, kind, n, length, t, p = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise InvalidField(f"bad checkpoint magic {magic!r}")
    if version != VERSION:
        raise InvalidField(f"unsupported checkpoint version {version}")
    if len(data) != HEADER.size + 16 * n:
        raise InvalidField(f"checkpoint payload has {len(data) - HEADER.size} bytes, expected {16 * n}")
    values = np.frombuffer(data, dtype="<f8", offset=HEADER.size).astype(np.float64).view(np.complex128)
    if kind == GRID_TORUS:
        if not math.isclose(length, 2 * math.pi, rel_tol=0, abs_tol=1e-15):
            raise InvalidField(f"torus period must be 2*pi, got {length}")
        grid = TorusGrid(int(n))
    elif kind == GRID_LINE:
        K = length / math.pi
        if abs(K - round(K)) > 1e-9:
            raise InvalidField(f"line half-length {length} is not a multiple of pi")
        grid = LineGrid(int(n), int(round(K)))
    else:
        raise InvalidField(f"unknown grid type {kind}")
    return Checkpoint(ComplexField(grid, values), t, p)


def write_checkpoint(path, f: ComplexField, t: float, p: float) -> None:
    Path(path).write_bytes(encode(f, t, p))


def read_checkpoint(path) -> Checkpoint:
    return decode(Path(path).read_bytes())
