"""Seeded generator for a small 4-class sequence-classification task.

Each example is a random sequence of filler tokens containing exactly one
of four marker tokens; the class is which marker appears. The task is
easy enough for very small encoders to learn on a CPU yet still requires
attending across the sequence, which makes it a useful stand-in corpus
for end-to-end pipeline runs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import SPECIAL_TOKENS, LabeledDataset, Vocab

N_CLASSES = 4
MARKER_TOKENS = [f"marker{i}" for i in range(N_CLASSES)]
FILLER_TOKENS = [f"tok{i:02d}" for i in range(24)]
DEFAULT_MAX_LEN = 16


def build_vocab() -> Vocab:
    """32-token vocabulary: specials, markers, fillers."""
    return Vocab(list(SPECIAL_TOKENS) + MARKER_TOKENS + FILLER_TOKENS)


def generate(n_examples: int, seed: int, split: str = "train",
             min_fillers: int = 5, max_fillers: int = 13) -> LabeledDataset:
    """Draw ``n_examples`` marker-task examples, deterministic in ``seed``."""
    split_key = sum(ord(c) for c in split)  # stable across processes
    rng = np.random.default_rng(np.random.SeedSequence([seed, split_key]))
    examples: list[tuple[str, int]] = []
    for _ in range(n_examples):
        label = int(rng.integers(0, N_CLASSES))
        length = int(rng.integers(min_fillers, max_fillers + 1))
        words = [FILLER_TOKENS[j] for j in rng.integers(0, len(FILLER_TOKENS), length)]
        pos = int(rng.integers(0, length + 1))
        words.insert(pos, MARKER_TOKENS[label])
        examples.append((" ".join(words), label))
    return LabeledDataset(examples, list(MARKER_TOKENS), split)


def make_task(n_train: int, n_validation: int, n_test: int, seed: int
              ) -> dict[str, LabeledDataset]:
    """Disjointly seeded train/validation/test splits."""
    return {
        "train": generate(n_train, seed, "train"),
        "validation": generate(n_validation, seed + 1, "validation"),
        "test": generate(n_test, seed + 2, "test"),
    }


def write_jsonl(dataset: LabeledDataset, path: str | Path) -> None:
    """Dump a dataset in the loader's JSONL schema (text/label fields)."""
    with open(path, "w", encoding="utf-8") as f:
        for text, label_id in dataset.examples:
            f.write(json.dumps(
                {"text": text, "label": dataset.label_names[label_id]}
            ) + "\n")


def write_task_dir(task: dict[str, LabeledDataset], out_dir: str | Path) -> Path:
    """Write train/validation/test JSONL files plus the vocab file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split, ds in task.items():
        write_jsonl(ds, out / f"{split}.jsonl")
    build_vocab().save(out / "vocab.txt")
    return out
