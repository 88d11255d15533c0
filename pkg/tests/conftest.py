import numpy as np
import pytest

from prunecoder import ModelConfig


@pytest.fixture
def tiny_config():
    """The smallest full-featured config used across the suite."""
    return ModelConfig(
        num_layers=2, hidden_size=8, num_heads=2, intermediate_size=16,
        vocab_size=32, max_positions=16, num_classes=4,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_batch(config, rng, batch=2, seq=4, mask_last=False):
    ids = rng.integers(0, config.vocab_size, (batch, seq))
    mask = np.ones((batch, seq), dtype=np.int64)
    if mask_last:
        mask[0, -1] = 0
    labels = rng.integers(0, config.num_classes, batch)
    return ids, mask, labels
