"""Minimal writer for the PRNC1 checkpoint format.

Implements the byte layout documented in the consuming toolkit's
docs/format.md: magic, 8-byte little-endian header length, canonical JSON
header (sorted keys, compact separators, ASCII), then float32
little-endian tensor data in lexicographic name order, each tensor
aligned to a 64-byte boundary within the payload.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"PRNC1\n"
FORMAT_VERSION = 1
ALIGNMENT = 64


def write_checkpoint(
    tensors: dict[str, np.ndarray],
    model_config: dict,
    path: str | Path,
    prune_records: list[dict] | None = None,
) -> None:
    """Serialize ``tensors`` (canonical names) and the config header."""
    table: dict[str, dict] = {}
    chunks: list[bytes] = []
    offset = 0
    for name in sorted(tensors):
        data = np.ascontiguousarray(tensors[name], dtype="<f4").tobytes()
        aligned = (offset + ALIGNMENT - 1) // ALIGNMENT * ALIGNMENT
        if aligned > offset:
            chunks.append(b"\x00" * (aligned - offset))
        chunks.append(data)
        table[name] = {
            "dtype": "f32",
            "shape": list(np.asarray(tensors[name]).shape),
            "byte_offset": aligned,
            "byte_length": len(data),
        }
        offset = aligned + len(data)

    header = {
        "format_version": FORMAT_VERSION,
        "model_config": model_config,
        "prune_records": prune_records or [],
        "tensors": table,
    }
    header_bytes = json.dumps(
        header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for chunk in chunks:
            f.write(chunk)
