"""Convert a hub-layout BERT checkpoint directory into PRNC1.

A source directory holds ``config.json``, a weight file
(``model.safetensors`` or ``pytorch_model.bin``), and ``vocab.txt``.
The exporter maps tensor names to the interchange vocabulary, normalizes
data to float32 (otherwise lossless, no transposes), copies the
architecture fields out of the config, and omits any task head: the
output is a headless checkpoint the pruning toolkit can fine-tune.
"""

from __future__ import annotations

import json
import logging
import shutil
import struct
from pathlib import Path

import numpy as np

from .mapping import map_tensor_names
from .prnc_writer import write_checkpoint

log = logging.getLogger("hfexport")

# source config key -> interchange config key
_CONFIG_FIELDS = {
    "num_hidden_layers": "num_layers",
    "hidden_size": "hidden_size",
    "num_attention_heads": "num_heads",
    "intermediate_size": "intermediate_size",
    "vocab_size": "vocab_size",
    "max_position_embeddings": "max_positions",
    "type_vocab_size": "type_vocab",
}

_SAFETENSORS_DTYPES = {"F32": "<f4", "F64": "<f8", "F16": "<f2", "BF16": None}


class ExportError(ValueError):
    pass


def read_safetensors(path: str | Path) -> dict[str, np.ndarray]:
    """Parse a safetensors file with numpy alone."""
    raw = Path(path).read_bytes()
    (header_len,) = struct.unpack_from("<Q", raw, 0)
    header = json.loads(raw[8 : 8 + header_len])
    data = raw[8 + header_len :]
    tensors: dict[str, np.ndarray] = {}
    for name, entry in header.items():
        if name == "__metadata__":
            continue
        dtype = _SAFETENSORS_DTYPES.get(entry["dtype"])
        if entry["dtype"] == "BF16":
            start, end = entry["data_offsets"]
            u16 = np.frombuffer(data[start:end], dtype="<u2")
            arr = (u16.astype(np.uint32) << 16).view(np.float32)
            tensors[name] = arr.reshape(entry["shape"])
            continue
        if dtype is None:
            raise ExportError(
                f"{path}: tensor {name!r} has unsupported dtype {entry['dtype']}")
        start, end = entry["data_offsets"]
        arr = np.frombuffer(data[start:end], dtype=dtype)
        tensors[name] = arr.reshape(entry["shape"])
    return tensors


def read_torch_bin(path: str | Path) -> dict[str, np.ndarray]:
    """Load a pickled torch state dict; requires torch."""
    import torch

    state = torch.load(path, map_location="cpu", weights_only=True)
    return {k: v.to(torch.float32).numpy() for k, v in state.items()}


def load_source(model_dir: str | Path) -> tuple[dict, dict[str, np.ndarray], Path]:
    """Read (config, raw tensors, vocab path) from a hub-layout directory."""
    model_dir = Path(model_dir)
    config_path = model_dir / "config.json"
    if not config_path.exists():
        raise ExportError(f"{model_dir}: missing config.json")
    config = json.loads(config_path.read_text(encoding="utf-8"))

    st = model_dir / "model.safetensors"
    bin_ = model_dir / "pytorch_model.bin"
    if st.exists():
        tensors = read_safetensors(st)
    elif bin_.exists():
        tensors = read_torch_bin(bin_)
    else:
        raise ExportError(
            f"{model_dir}: no weight file (model.safetensors or "
            "pytorch_model.bin)")

    vocab = model_dir / "vocab.txt"
    if not vocab.exists():
        raise ExportError(f"{model_dir}: missing vocab.txt")
    return config, tensors, vocab


def build_model_config(source_config: dict) -> dict:
    """Interchange config header from a source config.json."""
    out: dict = {}
    missing = [k for k in _CONFIG_FIELDS if k not in source_config]
    if missing:
        raise ExportError("config field missing: " + ", ".join(sorted(missing)))
    for src_key, dst_key in _CONFIG_FIELDS.items():
        out[dst_key] = source_config[src_key]
    out["layer_norm_eps"] = source_config.get("layer_norm_eps", 1e-12)
    # the toolkit decides training-time dropout itself; checkpoints are
    # eval-state weights
    out["dropout_prob"] = 0.0
    out["num_classes"] = None  # headless: task head is initialized downstream
    return out


def export(
    model_dir: str | Path,
    out_path: str | Path,
    vocab_out: str | Path | None = None,
) -> dict:
    """Convert ``model_dir`` into a PRNC1 checkpoint at ``out_path``.

    The vocabulary is copied next to the checkpoint (or to ``vocab_out``).
    Returns a summary dict {tensors, skipped, num_layers}.
    """
    source_config, raw, vocab_path = load_source(model_dir)
    model_config = build_model_config(source_config)

    name_map, skipped = map_tensor_names(sorted(raw))
    for name in skipped:
        log.info("skipping source tensor %s", name)

    tensors = {canonical: np.asarray(raw[src], dtype=np.float32)
               for src, canonical in name_map.items()}

    expected = _expected_names(model_config)
    missing = sorted(expected - set(tensors))
    if missing:
        raise ExportError("source lacks required tensors: " + ", ".join(missing))
    extra = sorted(set(tensors) - expected)
    if extra:
        raise ExportError("mapped tensors not in the format: " + ", ".join(extra))

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_checkpoint(tensors, model_config, out_path)

    if vocab_out is None:
        vocab_out = out_path.with_suffix(".vocab.txt")
    shutil.copyfile(vocab_path, vocab_out)
    log.info("wrote %s (%d tensors, %d skipped) and %s",
             out_path, len(tensors), len(skipped), vocab_out)
    return {"tensors": len(tensors), "skipped": skipped,
            "num_layers": model_config["num_layers"]}


def _expected_names(model_config: dict) -> set[str]:
    """Every canonical tensor a headless checkpoint must carry."""
    names = {
        "embeddings.token", "embeddings.position", "embeddings.type",
        "embeddings.norm.gamma", "embeddings.norm.beta",
        "pooler.weight", "pooler.bias",
    }
    suffixes = [
        "attn.q.weight", "attn.q.bias", "attn.k.weight", "attn.k.bias",
        "attn.v.weight", "attn.v.bias", "attn.out.weight", "attn.out.bias",
        "attn.norm.gamma", "attn.norm.beta",
        "ffn.up.weight", "ffn.up.bias", "ffn.down.weight", "ffn.down.bias",
        "ffn.norm.gamma", "ffn.norm.beta",
    ]
    for i in range(model_config["num_layers"]):
        names.update(f"encoder.layer.{i}.{s}" for s in suffixes)
    return names
