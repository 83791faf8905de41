"""Model checkpoint container.

Layout: one JSON header line (UTF-8, canonical key order) terminated by a
newline, followed by the raw state blocks.  Each block is a little-endian
32-bit float array; block order equals the declaration order of the
model's parameters followed by its buffers (batchnorm running stats).
The header records the architecture description, per-block names/shapes,
and the seed, so a checkpoint is self-describing.
"""

from __future__ import annotations

import json

import numpy as np

FORMAT_NAME = "harkit-checkpoint-v1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, model, architecture: dict, seed: int) -> None:
    params = model.parameters()
    buffers = model.buffers()
    blocks = [(name, p.data, "param") for name, p in params]
    blocks += [(name, b, "buffer") for name, b in buffers]
    header = {
        "format": FORMAT_NAME,
        "architecture": architecture,
        "seed": seed,
        "dtype": "f32le",
        "blocks": [
            {"name": name, "shape": list(arr.shape), "kind": kind}
            for name, arr, kind in blocks
        ],
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode())
        f.write(b"\n")
        for _, arr, _ in blocks:
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Return (header, {block name: float32 ndarray})."""
    with open(path, "rb") as f:
        header_line = f.readline()
        try:
            header = json.loads(header_line.decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{path}: unreadable checkpoint header: {e}") from e
        if header.get("format") != FORMAT_NAME:
            raise CheckpointError(
                f"{path}: expected format {FORMAT_NAME!r}, got {header.get('format')!r}"
            )
        payload = f.read()
    arrays = {}
    offset = 0
    for block in header["blocks"]:
        shape = tuple(block["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        if offset + nbytes > len(payload):
            raise CheckpointError(f"{path}: truncated block {block['name']!r}")
        arrays[block["name"]] = np.frombuffer(
            payload, dtype="<f4", count=count, offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(payload):
        raise CheckpointError(f"{path}: {len(payload) - offset} trailing bytes")
    return header, arrays


def restore_state(model, arrays: dict) -> None:
    """Copy checkpoint arrays into a freshly built model, by name."""
    for name, p in model.parameters():
        if name not in arrays:
            raise CheckpointError(f"checkpoint missing parameter {name!r}")
        src = arrays[name]
        if src.shape != p.data.shape:
            raise CheckpointError(
                f"parameter {name!r}: checkpoint shape {src.shape} != model {p.data.shape}"
            )
        p.data[...] = src.astype(p.data.dtype)
    for name, b in model.buffers():
        if name not in arrays:
            raise CheckpointError(f"checkpoint missing buffer {name!r}")
        src = arrays[name]
        if src.shape != b.shape:
            raise CheckpointError(
                f"buffer {name!r}: checkpoint shape {src.shape} != model {b.shape}"
            )
        b[...] = src.astype(b.dtype)
