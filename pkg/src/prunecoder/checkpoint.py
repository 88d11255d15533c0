"""Bit-exact single-file checkpoint persistence.

Layout (see docs/format.md for the byte-level contract):

    magic "PRNC1\\n" | header length (8-byte LE unsigned) | UTF-8 JSON header
    | payload of raw little-endian float32 tensor data

The JSON header is canonical (lexicographic keys, compact separators,
ASCII), so identical inputs always produce byte-identical files. Tensors
are laid out in lexicographic name order, each starting on a 64-byte
boundary within the payload. Data is float32 on disk always; pass
``dtype=np.float64`` to :func:`load` for gradient-checking work.
"""

from __future__ import annotations

import json
import struct
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import (
    ModelConfig,
    ModelWeights,
    flatten_weights,
    tensor_names,
    tensor_shapes,
    unflatten_weights,
)
from .pruning import PruneRecord

MAGIC = b"PRNC1\n"
FORMAT_VERSION = 1
ALIGNMENT = 64


class CheckpointError(DataError):
    """Checkpoint file violates the format contract."""


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class MissingTensorError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError):
    pass


class TruncatedPayloadError(CheckpointError):
    pass


def _canonical_header_bytes(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save(
    weights: ModelWeights,
    config: ModelConfig,
    records: list[PruneRecord],
    path: str | Path,
) -> None:
    """Write a checkpoint; identical inputs give byte-identical files."""
    named = flatten_weights(weights)
    expected = tensor_names(config)
    missing = [n for n in expected if n not in named]
    if missing:
        raise MissingTensorError(f"weights lack tensor {missing[0]!r}")
    extra = [n for n in named if n not in expected]
    if extra:
        raise CheckpointError(f"unexpected tensor {extra[0]!r} for this config")

    table: dict[str, dict] = {}
    chunks: list[bytes] = []
    offset = 0
    for name in sorted(named):
        data = np.ascontiguousarray(named[name], dtype="<f4").tobytes()
        aligned = (offset + ALIGNMENT - 1) // ALIGNMENT * ALIGNMENT
        if aligned > offset:
            chunks.append(b"\x00" * (aligned - offset))
        chunks.append(data)
        table[name] = {
            "dtype": "f32",
            "shape": list(np.asarray(named[name]).shape),
            "byte_offset": aligned,
            "byte_length": len(data),
        }
        offset = aligned + len(data)

    header = {
        "format_version": FORMAT_VERSION,
        "model_config": config.to_dict(),
        "prune_records": [r.to_dict() for r in records],
        "tensors": table,
    }
    header_bytes = _canonical_header_bytes(header)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for chunk in chunks:
            f.write(chunk)


def load(
    path: str | Path, dtype=np.float32
) -> tuple[ModelWeights, ModelConfig, list[PruneRecord]]:
    """Read and validate a checkpoint file."""
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"{path}: bad magic bytes; not a checkpoint file")
    if len(raw) < len(MAGIC) + 8:
        raise TruncatedPayloadError(f"{path}: file too short for header length")
    (header_len,) = struct.unpack_from("<Q", raw, len(MAGIC))
    header_start = len(MAGIC) + 8
    if header_start + header_len > len(raw):
        raise TruncatedPayloadError(f"{path}: header length exceeds file")
    try:
        header = json.loads(raw[header_start : header_start + header_len])
    except ValueError as exc:
        raise CheckpointError(f"{path}: header is not valid JSON: {exc}") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{path}: unsupported format_version {version!r}"
        )
    try:
        config = ModelConfig.from_dict(header["model_config"])
        records = [PruneRecord.from_dict(d) for d in header["prune_records"]]
        table = header["tensors"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed header: {exc}") from exc

    payload = raw[header_start + header_len :]
    shapes = tensor_shapes(config)
    named: dict[str, np.ndarray] = {}
    for name in tensor_names(config):
        entry = table.get(name)
        if entry is None:
            raise MissingTensorError(f"{path}: tensor table missing {name!r}")
        if entry.get("dtype") != "f32":
            raise CheckpointError(
                f"{path}: tensor {name!r} has unsupported dtype {entry.get('dtype')!r}"
            )
        shape = tuple(entry["shape"])
        if shape != shapes[name]:
            raise ShapeMismatchError(
                f"{path}: tensor {name!r} has shape {list(shape)}, "
                f"config expects {list(shapes[name])}"
            )
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        length = entry["byte_length"]
        if length != count * 4:
            raise ShapeMismatchError(
                f"{path}: tensor {name!r} byte_length {length} does not match shape"
            )
        off = entry["byte_offset"]
        if off < 0 or off + length > len(payload):
            raise TruncatedPayloadError(
                f"{path}: tensor {name!r} byte_length exceeds file"
            )
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=off)
        named[name] = arr.reshape(shape).astype(dtype)
    unexpected = [n for n in table if n not in shapes]
    if unexpected:
        raise CheckpointError(f"{path}: unexpected tensor {unexpected[0]!r} in table")
    return unflatten_weights(named, config), config, records


def validate(weights: ModelWeights, config: ModelConfig) -> list[str]:
    """Check a weight set against its config; returns violations, [] if ok.

    Checks layer count, the presence and shape of every expected tensor,
    and finiteness. Never raises.
    """
    violations: list[str] = []
    effective = config
    if len(weights.layers) != config.num_layers:
        violations.append(
            f"layer list length {len(weights.layers)} != config num_layers "
            f"{config.num_layers}"
        )
        if len(weights.layers) >= 1:
            effective = replace(config, num_layers=len(weights.layers))
        else:
            return violations
    named = flatten_weights(weights)
    shapes = tensor_shapes(effective)
    for name in tensor_names(effective):
        if name not in named:
            violations.append(f"missing tensor {name}")
    for name, arr in named.items():
        if name not in shapes:
            violations.append(f"unexpected tensor {name}")
            continue
        if tuple(arr.shape) != shapes[name]:
            violations.append(
                f"tensor {name} has shape {list(arr.shape)}, "
                f"expected {list(shapes[name])}"
            )
        elif not np.isfinite(arr).all():
            violations.append(f"non-finite values in tensor {name}")
    return violations
