"""Binary parameter checkpoints.

Layout: magic, u32 manifest length, JSON manifest (layer names + shapes in
order), then per array a u32 rank, u32 dims, and raw little-endian float64
data. Round-trips bit-exactly.
"""

from __future__ import annotations

import json
import struct

import numpy as np

_MAGIC = b"GTCK0001"


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, named_arrays: dict[str, np.ndarray]) -> None:
    manifest = json.dumps(
        [{"name": name, "shape": list(arr.shape)} for name, arr in named_arrays.items()]
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(manifest)))
        fh.write(manifest)
        for arr in named_arrays.values():
            a = np.asarray(arr, dtype="<f8")   # tobytes() emits C order
            fh.write(struct.pack("<I", a.ndim))
            fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
            fh.write(a.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (mlen,) = struct.unpack("<I", fh.read(4))
        manifest = json.loads(fh.read(mlen).decode("utf-8"))
        out: dict[str, np.ndarray] = {}
        for entry in manifest:
            (rank,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{rank}I", fh.read(4 * rank)) if rank else ()
            if list(shape) != entry["shape"]:
                raise CheckpointError(
                    f"{path}: shape prefix {list(shape)} disagrees with manifest "
                    f"{entry['shape']} for {entry['name']}")
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape)
            out[entry["name"]] = data.astype(np.float64)
        if fh.read(1):
            raise CheckpointError(f"{path}: trailing bytes after last array")
    return out
