"""Corpus loading, WordPiece tokenization, and batch assembly.

Text is whitespace pre-split only (no lower-casing, no punctuation
handling) so Devanagari and other scripts pass through untouched, then
each word is matched greedily against the vocabulary with "##"
continuation pieces. Batches are padded to a fixed length with position 0
reserved for [CLS].
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import DataError

PAD, UNK, CLS, SEP = 0, 1, 2, 3
SPECIAL_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]")

# Default per-corpus-style sequence lengths: short headlines, long
# paragraphs, long documents. Overridable everywhere they are used.
MAX_LEN_PRESETS = {"shc": 64, "lpc": 256, "ldc": 512}


class Vocab:
    """Token list with fixed special ids and a token -> id map."""

    def __init__(self, tokens: list[str]):
        if tuple(tokens[:4]) != SPECIAL_TOKENS:
            raise DataError(
                f"vocab must start with {SPECIAL_TOKENS}, got {tokens[:4]}"
            )
        if len(set(tokens)) != len(tokens):
            raise DataError("vocab contains duplicate tokens")
        self.tokens = list(tokens)
        self.token_to_id = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    @classmethod
    def from_file(cls, path: str | Path) -> "Vocab":
        """One token per line; the line number is the id."""
        text = Path(path).read_text(encoding="utf-8")
        return cls([line for line in text.splitlines()])

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")


@dataclass
class LabeledDataset:
    """Raw (text, label_id) examples plus the sorted label vocabulary."""

    examples: list[tuple[str, int]]
    label_names: list[str]
    split: str = "train"

    def __len__(self) -> int:
        return len(self.examples)


@dataclass
class EncodedDataset:
    """Token ids, masks and labels ready for the model."""

    input_ids: np.ndarray  # [N, S] int64
    attention_mask: np.ndarray  # [N, S] int64, 0/1
    labels: np.ndarray  # [N] int64
    label_names: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return self.input_ids.shape[0]


@dataclass
class Batch:
    input_ids: np.ndarray
    attention_mask: np.ndarray
    labels: np.ndarray


def wordpiece_tokenize(text: str, vocab: Vocab) -> list[int]:
    """Greedy longest-match WordPiece over whitespace-split words.

    A word with no full match decomposes into the longest matching prefix
    and "##"-prefixed continuations; if any piece is unmatchable the whole
    word becomes a single [UNK].
    """
    ids: list[int] = []
    for word in text.split():
        pieces: list[int] = []
        start = 0
        while start < len(word):
            end = len(word)
            found = None
            while start < end:
                piece = word[start:end]
                if start > 0:
                    piece = "##" + piece
                if piece in vocab:
                    found = vocab.token_to_id[piece]
                    break
                end -= 1
            if found is None:
                pieces = [UNK]
                break
            pieces.append(found)
            start = end
        ids.extend(pieces)
    return ids


def encode_example(
    text: str, vocab: Vocab, max_len: int
) -> tuple[np.ndarray, np.ndarray]:
    """[CLS] + tokens truncated to max_len-2 + [SEP], padded with [PAD]."""
    if max_len < 2:
        raise ValueError("max_len must be >= 2 to fit [CLS] and [SEP]")
    body = wordpiece_tokenize(text, vocab)[: max_len - 2]
    ids = np.full(max_len, PAD, dtype=np.int64)
    mask = np.zeros(max_len, dtype=np.int64)
    seq = [CLS] + body + [SEP]
    ids[: len(seq)] = seq
    mask[: len(seq)] = 1
    return ids, mask


def encode_dataset(dataset: LabeledDataset, vocab: Vocab, max_len: int) -> EncodedDataset:
    """Tokenize and pad every example; row order is preserved."""
    n = len(dataset.examples)
    ids = np.empty((n, max_len), dtype=np.int64)
    mask = np.empty((n, max_len), dtype=np.int64)
    labels = np.empty(n, dtype=np.int64)
    for i, (text, label) in enumerate(dataset.examples):
        ids[i], mask[i] = encode_example(text, vocab, max_len)
        labels[i] = label
    return EncodedDataset(ids, mask, labels, list(dataset.label_names))


def load_dataset(
    path: str | Path,
    format: str = "jsonl",
    text_field: str = "text",
    label_field: str = "label",
    split: str = "train",
) -> LabeledDataset:
    """Read a labeled corpus from CSV (header row) or JSONL.

    Label ids follow the lexicographic sort of the distinct label strings;
    row order is preserved. Malformed rows are reported with their line
    number.
    """
    path = Path(path)
    if format not in ("csv", "jsonl"):
        raise ValueError(f"unknown format {format!r}; expected csv or jsonl")
    rows: list[tuple[str, str]] = []
    if format == "csv":
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None:
                raise DataError(f"{path}: empty file, expected a header row")
            for missing in (text_field, label_field):
                if missing not in reader.fieldnames:
                    raise DataError(f"{path}: header lacks field {missing!r}")
            for row in reader:
                line = reader.line_num
                text, label = row.get(text_field), row.get(label_field)
                if text is None or label is None:
                    raise DataError(f"{path}: line {line}: missing field")
                rows.append((text, label))
    else:
        with open(path, encoding="utf-8") as f:
            for line_num, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(
                        f"{path}: line {line_num}: invalid JSON: {exc}"
                    ) from exc
                if text_field not in obj:
                    raise DataError(
                        f"{path}: line {line_num}: missing field {text_field!r}"
                    )
                if label_field not in obj:
                    raise DataError(
                        f"{path}: line {line_num}: missing field {label_field!r}"
                    )
                rows.append((str(obj[text_field]), str(obj[label_field])))
    if not rows:
        raise DataError(f"{path}: no examples found")
    label_names = sorted({label for _, label in rows})
    label_ids = {name: i for i, name in enumerate(label_names)}
    examples = [(text, label_ids[label]) for text, label in rows]
    return LabeledDataset(examples, label_names, split)


def batches(
    dataset: EncodedDataset,
    batch_size: int,
    seed: int = 0,
    shuffle: bool = False,
    epoch: int = 0,
) -> Iterator[Batch]:
    """Yield fixed-size batches, final partial batch included.

    Shuffling applies a Fisher-Yates permutation seeded by (seed, epoch),
    so batch order is reproducible per epoch.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = len(dataset)
    if shuffle:
        rng = np.random.default_rng(np.random.SeedSequence([seed, epoch]))
        order = rng.permutation(n)
    else:
        order = np.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        yield Batch(
            input_ids=dataset.input_ids[idx],
            attention_mask=dataset.attention_mask[idx],
            labels=dataset.labels[idx],
        )
