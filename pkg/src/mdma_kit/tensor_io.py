"""Binary tensor container and the seeded random generator.

File layout (all little-endian)::

    b"FMT1" | ndim: u32 | dims: ndim * u32 | payload: prod(dims) * f32, row-major

Masks are stored as 0.0/1.0 floats. Writes go to a temporary file in the
destination directory which is then renamed over the target.
"""
from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"FMT1"
MAX_NDIM = 5
_U32_MAX = 2**32 - 1

#: Name of the bit generator behind :func:`seeded_rng`. Bump the suffix if
#: the generator ever changes; every committed fixture depends on it.
RNG_ALGORITHM = "numpy.PCG64/v1"


class TensorFormatError(ValueError):
    """Raised for malformed tensor files or tensors that cannot be stored."""


def encode_tensor(tensor) -> bytes:
    arr = np.asarray(tensor)
    if arr.ndim < 1 or arr.ndim > MAX_NDIM:
        raise TensorFormatError(f"dim overflow: ndim={arr.ndim} not in [1, {MAX_NDIM}]")
    if any(d > _U32_MAX for d in arr.shape):
        raise TensorFormatError(f"dim overflow: shape {arr.shape}")
    if arr.dtype == bool:
        arr = arr.astype(np.float32)
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    header = MAGIC + struct.pack(f"<{arr.ndim + 1}I", arr.ndim, *arr.shape)
    return header + payload


def decode_tensor(data: bytes) -> np.ndarray:
    if len(data) < 8 or data[:4] != MAGIC:
        raise TensorFormatError("bad magic")
    (ndim,) = struct.unpack_from("<I", data, 4)
    if ndim < 1 or ndim > MAX_NDIM:
        raise TensorFormatError(f"dim overflow: ndim={ndim} not in [1, {MAX_NDIM}]")
    header_len = 8 + 4 * ndim
    if len(data) < header_len:
        raise TensorFormatError("truncated payload: header cut short")
    dims = struct.unpack_from(f"<{ndim}I", data, 8)
    count = 1
    for d in dims:
        count *= d
    expected = header_len + 4 * count
    if len(data) < expected:
        raise TensorFormatError(
            f"truncated payload: expected {expected} bytes, got {len(data)}"
        )
    if len(data) > expected:
        raise TensorFormatError(f"trailing bytes: expected {expected}, got {len(data)}")
    arr = np.frombuffer(data, dtype="<f4", count=count, offset=header_len)
    return arr.reshape(dims).astype(np.float32)


def read_tensor(path) -> np.ndarray:
    """Read a tensor file into a float32 array."""
    return decode_tensor(Path(path).read_bytes())


def write_tensor(path, tensor) -> None:
    """Write ``tensor`` as float32, atomically replacing ``path``."""
    data = encode_tensor(tensor)
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".tns", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_mask(path, ndim: int | None = None) -> np.ndarray:
    """Read a tensor that must hold only 0/1 values; returns a bool array."""
    arr = read_tensor(path)
    if ndim is not None and arr.ndim != ndim:
        raise TensorFormatError(f"{path}: expected a {ndim}-d mask, got shape {arr.shape}")
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise TensorFormatError(f"{path}: mask entries must be 0.0 or 1.0")
    return arr.astype(bool)


def seeded_rng(seed: int) -> np.random.Generator:
    """Deterministic generator (PCG64, see :data:`RNG_ALGORITHM`)."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.Generator(np.random.PCG64(seed))
