from pathlib import Path

import pytest
import torch
from transformers import BertConfig, BertModel

TINY = dict(vocab_size=32, hidden_size=8, num_hidden_layers=2,
            num_attention_heads=2, intermediate_size=16,
            max_position_embeddings=16, type_vocab_size=2)


@pytest.fixture(scope="session")
def tiny_hub_dir(tmp_path_factory) -> Path:
    """A seeded random 2-layer BERT saved in the standard hub layout."""
    out = tmp_path_factory.mktemp("hub-model")
    torch.manual_seed(7)
    model = BertModel(BertConfig(**TINY))
    model.eval()
    model.save_pretrained(out)
    tokens = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"] + [
        f"tok{i:02d}" for i in range(TINY["vocab_size"] - 4)]
    (out / "vocab.txt").write_text("\n".join(tokens) + "\n", encoding="utf-8")
    return out


@pytest.fixture(scope="session")
def tiny_reference(tiny_hub_dir):
    """The same model reloaded through the source ecosystem, eval mode."""
    model = BertModel.from_pretrained(tiny_hub_dir)
    model.eval()
    return model
