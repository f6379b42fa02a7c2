"""Binary checkpoints for parameter stores.

Layout: magic "CTPS", format version u32, entry count u32, then per entry
(name length u16 + UTF-8 name, dtype tag u8, ndim u8, dims u64 LE, raw LE
payload), entries sorted lexicographically by name, and a trailing CRC32 of
everything before it. Run metadata (config hash, seed) travels in a JSON
sidecar ``<path>.json`` because the binary format carries tensors only.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .blobs import _DTYPES, _TAGS
from .params import ParamStore

MAGIC = b"CTPS"
VERSION = 1


class CheckpointError(Exception):
    pass


class BadMagicError(CheckpointError):
    pass


class BadVersionError(CheckpointError):
    pass


class BadChecksumError(CheckpointError):
    pass


def save_checkpoint(store: ParamStore, path, meta: dict | None = None):
    entries = store.state_arrays()
    body = bytearray()
    body += MAGIC
    body += struct.pack("<II", VERSION, len(entries))
    for name, arr in entries.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype not in _TAGS:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for entry {name}")
        nb = name.encode("utf-8")
        body += struct.pack("<H", len(nb)) + nb
        body += struct.pack("<BB", _TAGS[arr.dtype], arr.ndim)
        if arr.ndim:
            body += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        body += arr.astype(arr.dtype.newbyteorder("<")).tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(body))
    if meta is not None:
        Path(str(path) + ".json").write_text(
            json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path) -> ParamStore:
    buf = Path(path).read_bytes()
    if len(buf) < 12 or buf[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad checkpoint magic")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise BadVersionError(f"{path}: format version {version}, expected {VERSION}")
    if len(buf) < 16:
        raise BadChecksumError(f"{path}: truncated checkpoint")
    stored_crc = struct.unpack_from("<I", buf, len(buf) - 4)[0]
    if zlib.crc32(buf[:-4]) & 0xFFFFFFFF != stored_crc:
        raise BadChecksumError(f"{path}: checksum mismatch")

    store = ParamStore()
    offset = 12
    end = len(buf) - 4
    for _ in range(count):
        if offset + 2 > end:
            raise BadChecksumError(f"{path}: entry table overruns payload")
        (nlen,) = struct.unpack_from("<H", buf, offset)
        offset += 2
        name = buf[offset:offset + nlen].decode("utf-8")
        offset += nlen
        tag, ndim = struct.unpack_from("<BB", buf, offset)
        offset += 2
        dims = struct.unpack_from(f"<{ndim}Q", buf, offset) if ndim else ()
        offset += 8 * ndim
        dt = _DTYPES[tag]
        nbytes = int(np.prod(dims)) * dt.itemsize if dims else dt.itemsize
        arr = np.frombuffer(buf[offset:offset + nbytes], dtype=dt).reshape(dims).copy()
        offset += nbytes
        if ".running_" in name:
            store.add_buffer(name, arr)
        else:
            store.add_param(name, arr)
    if offset != end:
        raise BadChecksumError(f"{path}: {end - offset} unparsed payload bytes")
    return store


def load_meta(path) -> dict | None:
    side = Path(str(path) + ".json")
    if side.exists():
        return json.loads(side.read_text(encoding="utf-8"))
    return None
