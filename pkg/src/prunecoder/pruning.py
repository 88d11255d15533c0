"""Layer-removal strategies and weight-preserving checkpoint surgery.

Layer 0 sits next to the embeddings; layer L-1 feeds the pooler. "Top"
therefore removes the layers nearest the output, "bottom" the layers
nearest the input, and "middle" a single contiguous central block. When
the block cannot sit exactly in the center, the extra retained layer
stays on the bottom (input) side.

Surgery copies retained layer tensors bitwise, renumbers them
contiguously in their original order, and leaves embeddings, pooler, and
classifier untouched. Provenance is recorded in a PruneRecord embedded in
the checkpoint header.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, replace

from .errors import InvalidPruneSpec
from .model import ModelConfig, ModelWeights, copy_weights, param_count

STRATEGIES = ("top", "middle", "bottom")


@dataclass(frozen=True)
class PruneSpec:
    """A strategy name plus the number of layers to remove."""

    strategy: str
    k: int

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise InvalidPruneSpec(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        if self.k < 1:
            raise InvalidPruneSpec(f"k must satisfy 1 <= k <= L-1, got k={self.k}")

    @property
    def label(self) -> str:
        """Human-readable strategy label, e.g. 'Top 6'."""
        return f"{self.strategy.capitalize()} {self.k}"


@dataclass(frozen=True)
class PruneRecord:
    """Provenance for one surgery: which original layers survived."""

    source: str
    spec: PruneSpec
    retained: tuple[int, ...]
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "strategy": self.spec.strategy,
            "k": self.spec.k,
            "retained": list(self.retained),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PruneRecord":
        return cls(
            source=d["source"],
            spec=PruneSpec(d["strategy"], d["k"]),
            retained=tuple(d["retained"]),
            timestamp=d["timestamp"],
        )


def provenance_timestamp() -> str:
    """ISO-8601 UTC creation time; honors SOURCE_DATE_EPOCH for
    reproducible outputs."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch is not None else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def retained_indices(num_layers: int, spec: PruneSpec) -> list[int]:
    """Sorted original layer indices that survive ``spec``.

    top removes the k highest indices, bottom the k lowest; middle removes
    one contiguous block, keeping ceil((L-k)/2) bottom layers and
    floor((L-k)/2) top layers.
    """
    if not 1 <= spec.k <= num_layers - 1:
        raise InvalidPruneSpec(
            f"k must satisfy 1 <= k <= L-1 (L={num_layers}), got k={spec.k}"
        )
    keep = num_layers - spec.k
    if spec.strategy == "top":
        return list(range(keep))
    if spec.strategy == "bottom":
        return list(range(spec.k, num_layers))
    prefix = math.ceil(keep / 2)
    suffix = keep - prefix
    return list(range(prefix)) + list(range(num_layers - suffix, num_layers))


def prune_checkpoint(
    weights: ModelWeights,
    config: ModelConfig,
    spec: PruneSpec,
    source: str = "unnamed",
    timestamp: str | None = None,
) -> tuple[ModelWeights, ModelConfig, PruneRecord]:
    """Build a shallower model from the retained layers of ``weights``.

    Retained tensors are copied unchanged; the new model's layer i is the
    old layer retained[i]. Embeddings, pooler, and classifier pass through
    untouched.
    """
    kept = retained_indices(config.num_layers, spec)
    pruned = copy_weights(weights)
    pruned.layers = [pruned.layers[i] for i in kept]
    new_config = replace(config, num_layers=len(kept))
    record = PruneRecord(
        source=source,
        spec=spec,
        retained=tuple(kept),
        timestamp=timestamp if timestamp is not None else provenance_timestamp(),
    )
    return pruned, new_config, record


def compose_retained(first: tuple[int, ...], second: tuple[int, ...]) -> tuple[int, ...]:
    """Original-model indices retained after pruning twice in sequence."""
    return tuple(first[i] for i in second)


def size_report(before: ModelConfig, after: ModelConfig) -> dict[str, float]:
    """Layer and parameter reductions between two depths of one geometry."""
    same = ("hidden_size", "num_heads", "intermediate_size", "vocab_size",
            "max_positions", "type_vocab", "num_classes")
    for name in same:
        if getattr(before, name) != getattr(after, name):
            raise ValueError(f"configs differ in {name}; size_report compares depths only")
    if after.num_layers > before.num_layers:
        raise ValueError("after config is deeper than before config")
    k = before.num_layers - after.num_layers
    total_before = param_count(before)["total"]
    total_after = param_count(after)["total"]
    return {
        "layers_removed": k,
        "encoder_param_reduction_pct": 100.0 * k / before.num_layers,
        "total_param_reduction_pct": 100.0 * (total_before - total_after) / total_before,
    }
