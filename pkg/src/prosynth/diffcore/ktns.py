"""KTNS tensor files: magic "KTNS", version 0x01, dtype byte (0 = f32),
rank byte, rank u64 little-endian dims, then the row-major little-endian
payload.  Every persisted tensor in the project (mels, embeddings, checkpoint
entries) uses this format.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"KTNS"
VERSION = 1
DTYPE_F32 = 0


class KTNSError(IOError):
    pass


def write_ktns(path, array: np.ndarray):
    arr = np.asarray(array, dtype="<f4")
    if not arr.flags["C_CONTIGUOUS"]:
        arr = np.ascontiguousarray(arr)
    header = MAGIC + bytes([VERSION, DTYPE_F32, arr.ndim])
    header += b"".join(struct.pack("<Q", d) for d in arr.shape)
    Path(path).write_bytes(header + arr.tobytes())


def read_ktns(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 7:
        raise KTNSError(f"{path}: truncated header")
    if raw[:4] != MAGIC:
        raise KTNSError(f"{path}: bad magic {raw[:4]!r}")
    version, dtype_byte, rank = raw[4], raw[5], raw[6]
    if version != VERSION:
        raise KTNSError(f"{path}: unsupported version {version}")
    if dtype_byte != DTYPE_F32:
        raise KTNSError(f"{path}: unsupported dtype byte {dtype_byte}")
    offset = 7
    if len(raw) < offset + 8 * rank:
        raise KTNSError(f"{path}: truncated dims")
    dims = struct.unpack_from(f"<{rank}Q", raw, offset)
    offset += 8 * rank
    count = int(np.prod(dims)) if rank else 1
    expected = offset + 4 * count
    if len(raw) != expected:
        raise KTNSError(f"{path}: payload size {len(raw) - offset} does not match dims {dims}")
    data = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
    return data.reshape(dims).astype(np.float32)
