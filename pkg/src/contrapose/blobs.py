"""Raw tensor blob files (".tns").

Layout: magic "TNS1", dtype tag u8 (0 = float32, 1 = float64), ndim u8,
then ndim extents as u64 little-endian, then the raw little-endian payload.
Used for images, masks and backgrounds; checkpoints embed the same per-entry
encoding.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"TNS1"
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_TAGS = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def encode_array(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr)
    if arr.dtype not in _TAGS:
        raise ValueError(f"unsupported blob dtype {arr.dtype}")
    head = struct.pack("<BB", _TAGS[arr.dtype], arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b""
    return head + dims + arr.astype(arr.dtype.newbyteorder("<")).tobytes()


def decode_array(buf: bytes, offset: int = 0):
    """Decode one array, returning (array, next_offset)."""
    tag, ndim = struct.unpack_from("<BB", buf, offset)
    offset += 2
    if tag not in _DTYPES:
        raise ValueError(f"unknown blob dtype tag {tag}")
    dims = struct.unpack_from(f"<{ndim}Q", buf, offset) if ndim else ()
    offset += 8 * ndim
    dt = _DTYPES[tag]
    count = int(np.prod(dims)) if dims else 1
    end = offset + count * dt.itemsize
    if end > len(buf):
        raise ValueError("blob truncated")
    arr = np.frombuffer(buf[offset:end], dtype=dt).reshape(dims).copy()
    return arr, end


def write_tns(path, arr: np.ndarray):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(encode_array(arr))


def read_tns(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise ValueError(f"{path}: not a TNS1 blob")
    arr, end = decode_array(buf, 4)
    if end != len(buf):
        raise ValueError(f"{path}: trailing bytes after payload")
    return arr
