"""
Checkpoint Files
================

Layout (all integers little-endian):

    b"HGCTCKPT" | manifest length (uint64) | manifest (UTF-8 JSON) | tensor blob

The manifest carries the format version, the model configuration, training
metadata (epoch, seed) and one entry per tensor: name, dtype ("<f4"/"<f8"),
shape, byte offset into the blob, byte count and kind (parameter/buffer).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from autodiff.tensor import default_dtype
from common.exceptions import CheckpointError
from common.types import ModelConfig
from hgct.model import HgctModel, build_model
from skeleton.graph import SkeletonGraph

logger = logging.getLogger(__name__)

MAGIC = b"HGCTCKPT"
FORMAT_VERSION = 1
_LENGTH_BYTES = 8
_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


@dataclass
class Checkpoint:
    """Decoded checkpoint contents."""

    config: ModelConfig
    state: dict[str, np.ndarray]
    metadata: dict[str, Any] = field(default_factory=dict)
    kinds: dict[str, str] = field(default_factory=dict)


def save_checkpoint(model: HgctModel, path: str | Path, metadata: dict[str, Any] | None = None) -> Path:
    """Write every parameter and buffer of `model` to `path`."""
    path = Path(path)
    entries: list[dict[str, Any]] = []
    chunks: list[bytes] = []
    offset = 0
    named = [(n, t, "parameter") for n, t in model.named_parameters()]
    named += [(n, t, "buffer") for n, t in model.named_buffers()]
    for name, tensor, kind in named:
        array = np.ascontiguousarray(tensor.data)
        dtype = array.dtype.newbyteorder("<")
        raw = array.astype(dtype, copy=False).tobytes()
        entries.append(
            {
                "name": name,
                "dtype": dtype.str,
                "shape": list(array.shape),
                "offset": offset,
                "nbytes": len(raw),
                "kind": kind,
            }
        )
        chunks.append(raw)
        offset += len(raw)

    manifest = {
        "format_version": FORMAT_VERSION,
        "model_config": model.config.to_dict(),
        "metadata": metadata or {},
        "tensors": entries,
    }
    header = json.dumps(manifest, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(MAGIC)
        f.write(len(header).to_bytes(_LENGTH_BYTES, "little"))
        f.write(header)
        for chunk in chunks:
            f.write(chunk)
    logger.info("Saved checkpoint %s (%d tensors, %d bytes)", path, len(entries), offset)
    return path


def _parse_manifest(raw: bytes, path: Path) -> tuple[dict[str, Any], int]:
    if len(raw) < len(MAGIC) + _LENGTH_BYTES or not raw.startswith(MAGIC):
        raise CheckpointError(f"{path} is not a checkpoint (bad magic or truncated header)")
    start = len(MAGIC) + _LENGTH_BYTES
    length = int.from_bytes(raw[len(MAGIC) : start], "little")
    if start + length > len(raw):
        raise CheckpointError(f"{path} is truncated inside the manifest")
    try:
        manifest = json.loads(raw[start : start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path} has an unreadable manifest: {e}") from e
    if not isinstance(manifest, dict):
        raise CheckpointError(f"{path} manifest is not an object")
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path} has unsupported format version {version!r} (expected {FORMAT_VERSION})")
    return manifest, start + length


def read_checkpoint(path: str | Path) -> Checkpoint:
    """Decode a checkpoint without building a model.

    Raises:
        CheckpointError: On a missing or truncated file, a bad manifest or an unknown version.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    manifest, blob_start = _parse_manifest(raw, path)
    blob = memoryview(raw)[blob_start:]

    try:
        config = ModelConfig.from_dict(manifest["model_config"])
        state: dict[str, np.ndarray] = {}
        kinds: dict[str, str] = {}
        for entry in manifest["tensors"]:
            name = entry["name"]
            if name in state:
                raise CheckpointError(f"{path} lists tensor '{name}' twice")
            dtype = _DTYPES.get(entry["dtype"])
            if dtype is None:
                raise CheckpointError(f"{path}: tensor '{name}' has unsupported dtype {entry['dtype']!r}")
            shape = tuple(int(d) for d in entry["shape"])
            offset, nbytes = int(entry["offset"]), int(entry["nbytes"])
            if nbytes != int(np.prod(shape, dtype=np.int64)) * dtype.itemsize:
                raise CheckpointError(f"{path}: tensor '{name}' byte count does not match shape {shape}")
            if offset < 0 or offset + nbytes > len(blob):
                raise CheckpointError(f"{path} is truncated: tensor '{name}' needs bytes {offset}..{offset + nbytes}")
            array = np.frombuffer(blob[offset : offset + nbytes], dtype=dtype).reshape(shape)
            state[name] = array.astype(dtype.newbyteorder("="), copy=True)
            kinds[name] = entry.get("kind", "parameter")
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path} has an invalid manifest: {e}") from e
    return Checkpoint(config, state, dict(manifest.get("metadata", {})), kinds)


def load_checkpoint(
    path: str | Path, model: HgctModel | None = None, graph: SkeletonGraph | None = None
) -> HgctModel:
    """Restore a model; builds one from the stored configuration when `model` is None.

    Raises:
        CheckpointError: If the file is invalid or names/shapes do not match the model.
    """
    checkpoint = read_checkpoint(path)
    if model is None:
        dtype = next(iter(checkpoint.state.values())).dtype if checkpoint.state else np.float32
        with default_dtype(dtype):
            model = build_model(checkpoint.config, seed=int(checkpoint.metadata.get("seed", 0)), graph=graph)
    model.load_state_dict(checkpoint.state)
    model.set_epoch(int(checkpoint.metadata.get("epoch", 0)))
    logger.info("Loaded checkpoint %s", path)
    return model
