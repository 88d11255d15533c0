"""Encoder forward/backward contracts, parameter accounting, initialization."""

import math

import numpy as np
import pytest

from prunecoder import model as M
from prunecoder.errors import DataError

from conftest import random_batch


class TestModelConfig:
    def test_head_divisibility_enforced(self):
        with pytest.raises(ValueError):
            M.ModelConfig(num_layers=1, hidden_size=10, num_heads=3,
                          intermediate_size=8, vocab_size=8, max_positions=8)

    def test_presets_depths(self):
        assert M.base_config().num_layers == 12
        assert M.small_config().num_layers == 6
        assert M.smaller_config().num_layers == 2

    def test_round_trips_through_dict(self, tiny_config):
        assert M.ModelConfig.from_dict(tiny_config.to_dict()) == tiny_config

    def test_headless_allowed(self):
        cfg = M.ModelConfig(num_layers=1, hidden_size=8, num_heads=2,
                            intermediate_size=8, vocab_size=8, max_positions=8)
        assert cfg.num_classes is None

    def test_bad_class_count(self):
        with pytest.raises(ValueError):
            M.ModelConfig(num_layers=1, hidden_size=8, num_heads=2,
                          intermediate_size=8, vocab_size=8, max_positions=8,
                          num_classes=1)


class TestParamCount:
    def test_tiny_breakdown(self, tiny_config):
        counts = M.param_count(tiny_config)
        assert counts == {
            "embeddings": 416, "per_layer": 600, "encoder_total": 1200,
            "pooler": 72, "classifier": 36, "total": 1724,
        }

    def test_bert_base_per_layer(self):
        cfg = M.base_config(num_classes=2)
        assert M.param_count(cfg)["per_layer"] == 7_087_872

    def test_encoder_reduction_fractions(self):
        # removing k of L layers cuts encoder params by exactly k/L
        per = M.param_count(M.base_config(num_classes=2))["per_layer"]
        assert 6 * per / (12 * per) == 0.5
        assert round(100 * 10 * per / (12 * per), 2) == 83.33

    @pytest.mark.parametrize("seed", range(10))
    def test_total_matches_tensor_size_sum(self, seed):
        rng = np.random.default_rng(seed)
        heads = int(rng.integers(1, 4))
        cfg = M.ModelConfig(
            num_layers=int(rng.integers(1, 5)),
            hidden_size=heads * int(rng.integers(2, 7)),
            num_heads=heads,
            intermediate_size=int(rng.integers(4, 33)),
            vocab_size=int(rng.integers(8, 65)),
            max_positions=int(rng.integers(4, 33)),
            type_vocab=int(rng.integers(1, 4)),
            num_classes=int(rng.integers(2, 7)),
        )
        weights = M.init_scratch(cfg, seed)
        tensor_sum = sum(a.size for a in M.flatten_weights(weights).values())
        assert M.param_count(cfg)["total"] == tensor_sum


class TestInitScratch:
    def test_deterministic(self, tiny_config):
        a = M.flatten_weights(M.init_scratch(tiny_config, 7))
        b = M.flatten_weights(M.init_scratch(tiny_config, 7))
        for name in a:
            assert np.array_equal(a[name], b[name]), name

    def test_seed_changes_weights(self, tiny_config):
        a = M.init_scratch(tiny_config, 1).token_embeddings
        b = M.init_scratch(tiny_config, 2).token_embeddings
        assert not np.array_equal(a, b)

    def test_token_embedding_statistics(self):
        cfg = M.ModelConfig(num_layers=1, hidden_size=64, num_heads=2,
                            intermediate_size=64, vocab_size=256,
                            max_positions=8, num_classes=2)
        emb = M.init_scratch(cfg, 0).token_embeddings
        assert emb.size >= 10_000
        assert abs(float(emb.mean())) < 0.01
        assert abs(float(emb.std()) - 0.02) < 0.005
        assert float(np.abs(emb).max()) <= 0.04 + 1e-7

    def test_gamma_ones_beta_zeros_bias_zeros(self, tiny_config):
        named = M.flatten_weights(M.init_scratch(tiny_config, 3))
        for name, arr in named.items():
            if name.endswith(".gamma"):
                assert np.array_equal(arr, np.ones_like(arr)), name
            elif name.endswith(".beta") or name.endswith(".bias"):
                assert np.array_equal(arr, np.zeros_like(arr)), name


class TestForward:
    def test_logit_shape_and_finiteness(self, tiny_config, rng):
        weights = M.init_scratch(tiny_config, 0)
        ids, mask, _ = random_batch(tiny_config, rng)
        logits = M.forward(weights, tiny_config, ids, mask)
        assert logits.shape == (2, 4)
        assert np.isfinite(logits).all()

    def test_masked_position_cannot_leak(self, tiny_config, rng):
        """Changing the token at a fully masked position changes nothing."""
        weights = M.init_scratch(tiny_config, 1)
        ids, mask, _ = random_batch(tiny_config, rng, batch=3, seq=6)
        mask[:, 4] = 0
        ids2 = ids.copy()
        ids2[:, 4] = (ids2[:, 4] + 5) % tiny_config.vocab_size
        a = M.forward(weights, tiny_config, ids, mask)
        b = M.forward(weights, tiny_config, ids2, mask)
        assert np.array_equal(a, b)

    def test_batch_permutation_covariance(self, tiny_config, rng):
        weights = M.init_scratch(tiny_config, 2)
        ids, mask, _ = random_batch(tiny_config, rng, batch=5, seq=4)
        perm = rng.permutation(5)
        a = M.forward(weights, tiny_config, ids, mask)
        b = M.forward(weights, tiny_config, ids[perm], mask[perm])
        assert np.array_equal(a[perm], b)

    def test_deterministic(self, tiny_config, rng):
        weights = M.init_scratch(tiny_config, 3)
        ids, mask, _ = random_batch(tiny_config, rng)
        a = M.forward(weights, tiny_config, ids, mask)
        b = M.forward(weights, tiny_config, ids, mask)
        assert np.array_equal(a, b)

    def test_input_validation(self, tiny_config, rng):
        weights = M.init_scratch(tiny_config, 4)
        ids, mask, _ = random_batch(tiny_config, rng)
        with pytest.raises(DataError):
            M.forward(weights, tiny_config, ids * 0 + 99, mask)
        with pytest.raises(DataError):
            M.forward(weights, tiny_config, ids, mask * 0)
        long_ids = np.zeros((1, tiny_config.max_positions + 1), dtype=np.int64)
        with pytest.raises(DataError):
            M.forward(weights, tiny_config, long_ids, np.ones_like(long_ids))

    def test_headless_forward_pooled(self, tiny_config, rng):
        from dataclasses import replace
        headless = replace(tiny_config, num_classes=None)
        weights = M.init_scratch(headless, 5)
        ids, mask, _ = random_batch(tiny_config, rng)
        pooled = M.forward_pooled(weights, headless, ids, mask)
        assert pooled.shape == (2, tiny_config.hidden_size)
        with pytest.raises(DataError):
            M.forward(weights, headless, ids, mask)

    def test_attention_rows_sum_to_one(self, tiny_config, rng):
        # reconstruct one layer's attention probabilities independently
        weights = M.init_scratch(tiny_config, 6)
        ids, mask, _ = random_batch(tiny_config, rng, batch=2, seq=5)
        mask[0, 3:] = 0
        from prunecoder import tensor_ops as T
        emb = (weights.token_embeddings[ids]
               + weights.position_embeddings[:5]
               + weights.type_embeddings[0])
        h = T.layer_norm(emb, weights.embed_norm_gamma,
                         weights.embed_norm_beta,
                         tiny_config.layer_norm_eps).output
        layer = weights.layers[0]
        b, s, hd = h.shape
        a, d = tiny_config.num_heads, tiny_config.head_dim
        q = (h @ layer.q_weight.T + layer.q_bias).reshape(b, s, a, d).transpose(0, 2, 1, 3)
        k = (h @ layer.k_weight.T).reshape(b, s, a, d).transpose(0, 2, 1, 3)
        scores = q @ k.transpose(0, 1, 3, 2) / math.sqrt(d)
        scores = scores + (1 - mask)[:, None, None, :] * -1e9
        probs = T.softmax(scores, axis=-1).output
        sums = probs.sum(axis=-1)
        assert np.abs(sums - 1.0).max() < 1e-6
        # no weight reaches a masked position
        assert probs[0, :, :, 3:].max() == 0.0


class TestBackward:
    def test_uniform_loss_with_zero_classifier(self, tiny_config, rng):
        weights = M.init_scratch(tiny_config, 7)
        weights.classifier_weight[:] = 0.0
        weights.classifier_bias[:] = 0.0
        ids, mask, labels = random_batch(tiny_config, rng)
        loss, _ = M.backward(weights, tiny_config, ids, mask, labels)
        assert abs(loss - math.log(tiny_config.num_classes)) < 1e-6

    def test_gradient_set_matches_weight_structure(self, tiny_config, rng):
        weights = M.init_scratch(tiny_config, 8)
        ids, mask, labels = random_batch(tiny_config, rng)
        _, grads = M.backward(weights, tiny_config, ids, mask, labels)
        named = M.flatten_weights(weights)
        assert set(grads) == set(named)
        for name in named:
            assert grads[name].shape == named[name].shape, name

    def test_unused_position_rows_get_zero_grad(self, tiny_config, rng):
        weights = M.init_scratch(tiny_config, 9)
        ids, mask, labels = random_batch(tiny_config, rng, seq=4)
        _, grads = M.backward(weights, tiny_config, ids, mask, labels)
        g = grads["embeddings.position"]
        assert np.array_equal(g[4:], np.zeros_like(g[4:]))
        assert np.abs(g[:4]).max() > 0

    def test_unused_type_rows_get_zero_grad(self, tiny_config, rng):
        weights = M.init_scratch(tiny_config, 10)
        ids, mask, labels = random_batch(tiny_config, rng)
        _, grads = M.backward(weights, tiny_config, ids, mask, labels)
        g = grads["embeddings.type"]
        assert np.array_equal(g[1:], np.zeros_like(g[1:]))

    def test_key_bias_off_compute_path(self, tiny_config, rng):
        """Key bias cancels in softmax: exact zero gradient, and forward
        does not depend on its value."""
        weights = M.init_scratch(tiny_config, 11)
        ids, mask, labels = random_batch(tiny_config, rng)
        _, grads = M.backward(weights, tiny_config, ids, mask, labels)
        for i in range(tiny_config.num_layers):
            g = grads[f"encoder.layer.{i}.attn.k.bias"]
            assert np.array_equal(g, np.zeros_like(g))
        before = M.forward(weights, tiny_config, ids, mask)
        weights.layers[0].k_bias[:] = 123.0
        assert np.array_equal(M.forward(weights, tiny_config, ids, mask), before)

    @pytest.mark.parametrize("seed", range(3))
    def test_full_model_gradients(self, tiny_config, seed):
        assert M.gradient_check(tiny_config, seed=seed) < 1e-4


class TestFlattenRoundTrip:
    def test_flatten_unflatten_identity(self, tiny_config):
        weights = M.init_scratch(tiny_config, 12)
        named = M.flatten_weights(weights)
        rebuilt = M.unflatten_weights(named, tiny_config)
        for name, arr in M.flatten_weights(rebuilt).items():
            assert arr is named[name]

    def test_copy_is_deep(self, tiny_config):
        weights = M.init_scratch(tiny_config, 13)
        clone = M.copy_weights(weights)
        clone.layers[0].q_weight[:] = 0.0
        assert np.abs(weights.layers[0].q_weight).max() > 0

    def test_canonical_name_count(self, tiny_config):
        names = M.tensor_names(tiny_config)
        assert len(names) == 5 + 16 * tiny_config.num_layers + 2 + 2
        assert "embeddings.token" in names
        assert "encoder.layer.0.attn.q.weight" in names
        assert "pooler.weight" in names
