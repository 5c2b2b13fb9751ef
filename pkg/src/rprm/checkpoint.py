"""Binary checkpoint file for named parameter tensors.

Layout (little-endian): magic "RPCK", u16 version=1, u32 metadata length,
metadata JSON (utf-8), u32 tensor count, then per tensor:
u16 name length, name bytes, u8 rank, rank x u32 dims, f64 data.
"""
from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"RPCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, arrays, metadata=None):
    meta = json.dumps(metadata or {}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<H", VERSION))
        f.write(struct.pack("<I", len(meta)))
        f.write(meta)
        f.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype="<f8")
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<I", dim))
            f.write(arr.tobytes())


def load_checkpoint(path):
    with open(path, "rb") as f:
        data = f.read()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(data):
            raise CheckpointError("truncated checkpoint file")
        chunk = data[off:off + n]
        off += n
        return chunk

    if take(4) != MAGIC:
        raise CheckpointError("bad magic: not a checkpoint file")
    (version,) = struct.unpack("<H", take(2))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack("<I", take(4))
    metadata = json.loads(take(meta_len).decode("utf-8"))
    (count,) = struct.unpack("<I", take(4))
    arrays = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank)) if rank else ()
        size = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(take(8 * size), dtype="<f8").reshape(dims).copy()
        if name in arrays:
            raise CheckpointError(f"duplicate tensor name '{name}'")
        arrays[name] = arr
    if off != len(data):
        raise CheckpointError("trailing bytes after tensor table")
    return arrays, metadata
