"""Binary tensor file format.

Layout (all little-endian):
    8 bytes   magic "CIDLTNSR"
    u32       format version (1)
    u8        dtype code: 1 = float32, 2 = float64
    u8        ndim
    ndim*u64  dimensions
    payload   row-major scalars (last index fastest)

Round trips are bit-exact for float64; float32 files widen to float64 on
read.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadDtypeError,
    BadMagicError,
    BadVersionError,
    TruncatedPayloadError,
)

MAGIC = b"CIDLTNSR"
VERSION = 1
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODES = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}


def write_tensor(path, tensor: np.ndarray) -> None:
    arr = np.ascontiguousarray(tensor)
    if arr.dtype not in _CODES:
        arr = arr.astype(np.float64)
    code = _CODES[arr.dtype]
    header = MAGIC + struct.pack("<IBB", VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    with open(path, "wb") as f:
        f.write(header)
        f.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())


def read_tensor(path) -> np.ndarray:
    """Read a tensor file; float32 payloads are widened to float64."""
    raw = Path(path).read_bytes()
    if len(raw) < 14 or raw[:8] != MAGIC:
        raise BadMagicError(f"{path}: not a CIDLTNSR file")
    version, code, ndim = struct.unpack_from("<IBB", raw, 8)
    if version != VERSION:
        raise BadVersionError(f"{path}: unsupported version {version}")
    if code not in _DTYPES:
        raise BadDtypeError(f"{path}: unknown dtype code {code}")
    off = 14
    if len(raw) < off + 8 * ndim:
        raise TruncatedPayloadError(f"{path}: truncated header")
    shape = struct.unpack_from(f"<{ndim}Q", raw, off)
    off += 8 * ndim
    dtype = _DTYPES[code]
    n = int(np.prod(shape, dtype=np.uint64)) if ndim else 1
    expected = n * dtype.itemsize
    if len(raw) - off != expected:
        raise TruncatedPayloadError(
            f"{path}: payload is {len(raw) - off} bytes, expected {expected}"
        )
    arr = np.frombuffer(raw, dtype=dtype, count=n, offset=off).reshape(shape)
    return arr.astype(np.float64)
