"""Binary tensor container used for datasets, checkpoints and the wire protocol.

Layout: ``b"TNSR"``, one dtype byte (0 = float32), one ndim byte, ``ndim``
little-endian u32 dims, then the little-endian float32 payload in row-major
order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"TNSR"
DTYPE_F32 = 0
_HEADER = struct.Struct("<4sBB")


class TensorFormatError(ValueError):
    """Raised when a blob does not follow the TNSR layout."""


def encode_tensor(arr) -> bytes:
    a = np.asarray(arr)
    if a.ndim > 255:
        raise TensorFormatError("too many dimensions")
    if not np.all(np.isfinite(a)):
        raise TensorFormatError("tensor contains non-finite values")
    dims = struct.pack(f"<{a.ndim}I", *a.shape)
    payload = np.ascontiguousarray(a, dtype="<f4").tobytes()
    return _HEADER.pack(MAGIC, DTYPE_F32, a.ndim) + dims + payload


def decode_tensor(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise TensorFormatError("blob shorter than header")
    magic, dtype, ndim = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}")
    if dtype != DTYPE_F32:
        raise TensorFormatError(f"unsupported dtype code {dtype}")
    off = _HEADER.size
    if len(blob) < off + 4 * ndim:
        raise TensorFormatError("truncated dims")
    shape = struct.unpack_from(f"<{ndim}I", blob, off)
    off += 4 * ndim
    count = int(np.prod(shape, dtype=np.int64))
    if len(blob) != off + 4 * count:
        raise TensorFormatError(
            f"payload has {len(blob) - off} bytes, expected {4 * count}")
    data = np.frombuffer(blob, dtype="<f4", count=count, offset=off)
    return data.astype(np.float32).reshape(shape)


def save_tensor(path, arr) -> None:
    Path(path).write_bytes(encode_tensor(arr))


def load_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())
