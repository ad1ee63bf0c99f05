"""BEMB: a minimal bit-exact binary format for float32 embedding matrices.

Layout (all little-endian)::

    0..3    magic  b"BEMB"
    4..7    version, u32 (= 1)
    8..11   rows, u32
    12..15  cols, u32
    16..    rows * cols float32 values, row-major

No trailing bytes are allowed.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import (
    BadMagic,
    BadVersion,
    DimOverflow,
    MissingFile,
    NonFiniteInput,
    TrailingBytes,
    TruncatedFile,
)

MAGIC = b"BEMB"
VERSION = 1
HEADER = struct.Struct("<4sIII")
_U32_MAX = 2**32 - 1


def encode_bemb(m) -> bytes:
    a = np.asarray(m)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise DimOverflow(f"BEMB stores 2-d matrices, got {a.ndim}-d")
    rows, cols = a.shape
    if rows == 0 or cols == 0 or rows > _U32_MAX or cols > _U32_MAX:
        raise DimOverflow(f"shape {a.shape} not representable in a BEMB header")
    payload = np.ascontiguousarray(a, dtype="<f4")
    if not np.all(np.isfinite(payload)):
        raise NonFiniteInput("BEMB payload must be finite at 32-bit precision")
    return HEADER.pack(MAGIC, VERSION, rows, cols) + payload.tobytes()


def decode_bemb(buf: bytes) -> np.ndarray:
    """Parse BEMB bytes into a float64 matrix (exact upcast of the float32 payload)."""
    if len(buf) < HEADER.size:
        if len(buf) >= 4 and buf[:4] != MAGIC:
            raise BadMagic(f"bad magic {buf[:4]!r}")
        raise TruncatedFile(f"header needs {HEADER.size} bytes, got {len(buf)}")
    magic, version, rows, cols = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"unsupported BEMB version {version}")
    if rows == 0 or cols == 0:
        raise DimOverflow(f"header declares an empty {rows}x{cols} matrix")
    expected = rows * cols * 4
    have = len(buf) - HEADER.size
    if have < expected:
        raise TruncatedFile(
            f"header declares {rows}x{cols} ({expected} bytes), payload has {have}"
        )
    if have > expected:
        raise TrailingBytes(f"{have - expected} unexpected bytes after payload")
    a = np.frombuffer(buf, dtype="<f4", count=rows * cols, offset=HEADER.size)
    return a.reshape(rows, cols).astype(np.float64)


def write_bemb(path, m) -> None:
    data = encode_bemb(m)
    with open(path, "wb") as fh:
        fh.write(data)


def read_bemb(path) -> np.ndarray:
    if not os.path.isfile(path):
        raise MissingFile(f"no such BEMB file: {path}")
    with open(path, "rb") as fh:
        return decode_bemb(fh.read())


def read_header(path) -> tuple[int, int, int]:
    """Return ``(version, rows, cols)`` without loading the payload."""
    if not os.path.isfile(path):
        raise MissingFile(f"no such BEMB file: {path}")
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
    if len(head) < HEADER.size:
        raise TruncatedFile(f"header needs {HEADER.size} bytes, got {len(head)}")
    magic, version, rows, cols = HEADER.unpack(head)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    return version, rows, cols
