"""Binary checkpoint container shared by the denoiser and the ranker.

Layout: magic "RESD" | u32 LE container version | u64 LE manifest byte
length | UTF-8 JSON manifest | float32 LE weights in manifest-declared
order. Weights are stored as 32-bit floats; everything else in the repo
computes in 64-bit.
"""
from __future__ import annotations

import json
import os
import struct

import numpy as np

MAGIC = b"RESD"
CONTAINER_VERSION = 1


class CheckpointError(ValueError):
    """Malformed or incompatible checkpoint file."""


def save_checkpoint(path: str, manifest: dict, weights: dict) -> None:
    """Write manifest + named weight arrays atomically.

    manifest must contain "params": a list of [name, shape] pairs declaring
    the payload order; weights maps each name to an array of that shape.
    """
    declared = manifest.get("params")
    if declared is None:
        raise CheckpointError("manifest must declare a params list")
    payload = bytearray()
    for name, shape in declared:
        arr = np.asarray(weights[name], dtype=np.float64)
        if list(arr.shape) != list(shape):
            raise CheckpointError(f"weight {name!r} has shape {arr.shape}, declared {shape}")
        payload.extend(arr.astype("<f4").tobytes())
    manifest_bytes = json.dumps(manifest, separators=(",", ":"), sort_keys=True).encode("utf-8")
    blob = (MAGIC + struct.pack("<I", CONTAINER_VERSION)
            + struct.pack("<Q", len(manifest_bytes)) + manifest_bytes + bytes(payload))
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path: str):
    """Read (manifest, weights) back; weights come out as float64 arrays."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    version = struct.unpack("<I", blob[4:8])[0]
    if version != CONTAINER_VERSION:
        raise CheckpointError(f"{path}: unsupported container version {version}")
    manifest_len = struct.unpack("<Q", blob[8:16])[0]
    if len(blob) < 16 + manifest_len:
        raise CheckpointError(f"{path}: truncated manifest")
    manifest = json.loads(blob[16:16 + manifest_len].decode("utf-8"))
    offset = 16 + manifest_len
    weights = {}
    for name, shape in manifest["params"]:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        chunk = blob[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError(f"{path}: truncated payload at weight {name!r}")
        weights[name] = np.frombuffer(chunk, dtype="<f4").astype(np.float64).reshape(shape)
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes after payload")
    return manifest, weights
