"""Single-tensor binary file: 4-byte magic, header, raw f32 payload.

Layout (little-endian throughout):
    magic   4 bytes  b"MSMA"
    version u16      currently 1
    dtype   u8       0 = float32 (the only supported dtype)
    rank    u8       <= 4
    shape   rank x u64, every entry > 0
    data    prod(shape) float32 values, row-major
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import FormatError

MAGIC = b"MSMA"
VERSION = 1
DTYPE_F32 = 0
MAX_RANK = 4

_HEADER = struct.Struct("<4sHBB")


def write_tensor(path, array) -> None:
    arr = np.ascontiguousarray(array, dtype=np.float32)
    if arr.ndim == 0 or arr.ndim > MAX_RANK:
        raise FormatError(f"rank {arr.ndim} outside 1..{MAX_RANK}")
    if any(s <= 0 for s in arr.shape):
        raise FormatError(f"shape {arr.shape} has a non-positive entry")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, DTYPE_F32, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.tobytes(order="C"))


def _read_exact(fh, count, what):
    data = fh.read(count)
    if len(data) != count:
        offset = fh.tell() - len(data)
        raise FormatError(f"unexpected EOF at offset {offset} while reading {what}")
    return data


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, version, dtype, rank = _HEADER.unpack(_read_exact(fh, _HEADER.size, "header"))
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        if dtype != DTYPE_F32:
            raise FormatError(f"unknown dtype code {dtype}")
        if not 1 <= rank <= MAX_RANK:
            raise FormatError(f"rank {rank} outside 1..{MAX_RANK}")
        shape = struct.unpack(f"<{rank}Q", _read_exact(fh, 8 * rank, "shape"))
        if any(s == 0 for s in shape):
            raise FormatError(f"shape {shape} has a zero entry")
        n_values = 1
        for s in shape:
            n_values *= s
        payload = fh.read()
        if len(payload) != 4 * n_values:
            raise FormatError(
                f"payload size mismatch: got {len(payload)} bytes, "
                f"expected {4 * n_values} for shape {tuple(shape)}"
            )
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
