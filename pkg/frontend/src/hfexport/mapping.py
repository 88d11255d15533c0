"""Source-to-canonical tensor name mapping for BERT-family checkpoints.

Source names follow the mainstream hub convention, with or without the
``bert.`` prefix and with either ``LayerNorm.weight/bias`` or the older
``LayerNorm.gamma/beta`` spelling. Linear weights keep their
(out_features, in_features) orientation on both sides; nothing is
transposed.

Pretraining heads (``cls.*``), task heads (``classifier.*``), and buffer
entries like ``embeddings.position_ids`` are deliberately skipped: the
consuming toolkit initializes a fresh task head at fine-tune time. Any
other unrecognized tensor is an error, reported with the full list.
"""

from __future__ import annotations

import re

# fixed-name embedding and pooler tensors
_STATIC = {
    "embeddings.word_embeddings.weight": "embeddings.token",
    "embeddings.position_embeddings.weight": "embeddings.position",
    "embeddings.token_type_embeddings.weight": "embeddings.type",
    "embeddings.LayerNorm.weight": "embeddings.norm.gamma",
    "embeddings.LayerNorm.bias": "embeddings.norm.beta",
    "embeddings.LayerNorm.gamma": "embeddings.norm.gamma",
    "embeddings.LayerNorm.beta": "embeddings.norm.beta",
    "pooler.dense.weight": "pooler.weight",
    "pooler.dense.bias": "pooler.bias",
}

# per-layer suffixes, filled in for each encoder.layer.{i}
_LAYER = {
    "attention.self.query.weight": "attn.q.weight",
    "attention.self.query.bias": "attn.q.bias",
    "attention.self.key.weight": "attn.k.weight",
    "attention.self.key.bias": "attn.k.bias",
    "attention.self.value.weight": "attn.v.weight",
    "attention.self.value.bias": "attn.v.bias",
    "attention.output.dense.weight": "attn.out.weight",
    "attention.output.dense.bias": "attn.out.bias",
    "attention.output.LayerNorm.weight": "attn.norm.gamma",
    "attention.output.LayerNorm.bias": "attn.norm.beta",
    "attention.output.LayerNorm.gamma": "attn.norm.gamma",
    "attention.output.LayerNorm.beta": "attn.norm.beta",
    "intermediate.dense.weight": "ffn.up.weight",
    "intermediate.dense.bias": "ffn.up.bias",
    "output.dense.weight": "ffn.down.weight",
    "output.dense.bias": "ffn.down.bias",
    "output.LayerNorm.weight": "ffn.norm.gamma",
    "output.LayerNorm.bias": "ffn.norm.beta",
    "output.LayerNorm.gamma": "ffn.norm.gamma",
    "output.LayerNorm.beta": "ffn.norm.beta",
}

_LAYER_RE = re.compile(r"^encoder\.layer\.(\d+)\.(.+)$")

# tensors that are legitimately present in hub checkpoints but have no
# place in the interchange format
_SKIP_PREFIXES = ("cls.", "classifier.")
_SKIP_EXACT = ("embeddings.position_ids",)


class UnmappedTensorError(ValueError):
    """A source tensor under the encoder namespace has no canonical name."""


def strip_model_prefix(name: str) -> str:
    return name[5:] if name.startswith("bert.") else name


def should_skip(name: str) -> bool:
    name = strip_model_prefix(name)
    return name.startswith(_SKIP_PREFIXES) or name in _SKIP_EXACT


def canonical_name(name: str) -> str | None:
    """Canonical name for a source tensor, or None for skip-listed ones.

    Raises UnmappedTensorError for anything else unrecognized.
    """
    bare = strip_model_prefix(name)
    if should_skip(name):
        return None
    if bare in _STATIC:
        return _STATIC[bare]
    match = _LAYER_RE.match(bare)
    if match and match.group(2) in _LAYER:
        return f"encoder.layer.{match.group(1)}.{_LAYER[match.group(2)]}"
    raise UnmappedTensorError(name)


def map_tensor_names(names: list[str]) -> tuple[dict[str, str], list[str]]:
    """Map every source name; returns (source -> canonical, skipped).

    Raises UnmappedTensorError listing every unrecognized tensor at once.
    """
    mapped: dict[str, str] = {}
    skipped: list[str] = []
    unmapped: list[str] = []
    for name in names:
        try:
            target = canonical_name(name)
        except UnmappedTensorError:
            unmapped.append(name)
            continue
        if target is None:
            skipped.append(name)
        else:
            if target in mapped.values():
                raise UnmappedTensorError(
                    f"two source tensors map to {target!r}")
            mapped[name] = target
    if unmapped:
        raise UnmappedTensorError(
            "unmapped source tensors: " + ", ".join(sorted(unmapped)))
    return mapped, skipped
