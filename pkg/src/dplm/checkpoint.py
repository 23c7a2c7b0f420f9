"""Deterministic model checkpoints.

A checkpoint is a single binary container: an 8-byte magic, a format
version, a canonical JSON header (model config, caller metadata, tensor
index) and the raw little-endian tensor buffers in sorted-name order.
Nothing time- or path-dependent is written, so saving the same weights
and metadata twice produces byte-identical files, and a load/save cycle
round-trips exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import torch

from .model import DoaNet, ModelConfig

MAGIC = b"DPLMCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for unreadable, truncated or incompatible checkpoint files."""


def _canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(
    path: Union[str, Path],
    model: DoaNet,
    metadata: Dict[str, Any],
) -> Path:
    """Write model weights and JSON-serializable metadata to `path`."""
    path = Path(path)
    state = model.state_dict()
    names = sorted(state.keys())
    index = []
    buffers = []
    offset = 0
    for name in names:
        arr = state[name].detach().cpu().numpy()
        arr = np.ascontiguousarray(arr)
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        raw = arr.tobytes()
        index.append(
            {
                "name": name,
                "dtype": np.dtype(arr.dtype).str,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        buffers.append(raw)
        offset += len(raw)
    header = _canonical_json(
        {
            "schema_version": FORMAT_VERSION,
            "model_config": model.cfg.to_dict(),
            "metadata": metadata,
            "tensors": index,
        }
    )
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for raw in buffers:
            fh.write(raw)
    return path


def load_checkpoint(
    path: Union[str, Path],
) -> Tuple[DoaNet, ModelConfig, Dict[str, Any]]:
    """Read a checkpoint and rebuild its model in eval mode."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"no checkpoint at {path}")
    blob = path.read_bytes()
    if len(blob) < len(MAGIC) + 12 or not blob.startswith(MAGIC):
        raise CheckpointError(f"{path} is not a checkpoint file")
    pos = len(MAGIC)
    (version,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    if pos + header_len > len(blob):
        raise CheckpointError(f"{path} is truncated (header)")
    try:
        header = json.loads(blob[pos : pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path} has a corrupt header") from exc
    pos += header_len
    cfg = ModelConfig.from_dict(header["model_config"])
    state = {}
    float_dtype = None
    for entry in header["tensors"]:
        lo = pos + entry["offset"]
        hi = lo + entry["nbytes"]
        if hi > len(blob):
            raise CheckpointError(f"{path} is truncated (tensor {entry['name']})")
        arr = np.frombuffer(blob[lo:hi], dtype=np.dtype(entry["dtype"]))
        arr = arr.reshape(entry["shape"]).copy()
        tensor = torch.from_numpy(arr)
        if tensor.is_floating_point() and float_dtype is None:
            float_dtype = tensor.dtype
        state[entry["name"]] = tensor
    model = DoaNet(cfg)
    if float_dtype is not None:
        model = model.to(float_dtype)
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as exc:
        raise CheckpointError(f"{path} does not match its own model config") from exc
    model.eval()
    return model, cfg, header["metadata"]
