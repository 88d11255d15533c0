"""Checkpoint format round-trips, canonical bytes, and corruption handling."""

import json
import struct
from dataclasses import replace

import numpy as np
import pytest

from prunecoder import checkpoint as C
from prunecoder import model as M
from prunecoder.pruning import PruneSpec, prune_checkpoint


def make_model(seed, num_layers=2, num_classes=4):
    cfg = M.ModelConfig(num_layers=num_layers, hidden_size=8, num_heads=2,
                        intermediate_size=16, vocab_size=32, max_positions=16,
                        num_classes=num_classes)
    return M.init_scratch(cfg, seed), cfg


def assert_weights_equal(a, b):
    fa, fb = M.flatten_weights(a), M.flatten_weights(b)
    assert set(fa) == set(fb)
    for name in fa:
        assert np.array_equal(fa[name], fb[name]), name


class TestRoundTrip:
    def test_save_load_identity(self, tmp_path):
        weights, cfg = make_model(0)
        path = tmp_path / "m.ckpt"
        C.save(weights, cfg, [], path)
        loaded, loaded_cfg, records = C.load(path)
        assert loaded_cfg == cfg
        assert records == []
        assert_weights_equal(weights, loaded)

    def test_byte_identical_on_repeat_save(self, tmp_path):
        weights, cfg = make_model(1)
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        C.save(weights, cfg, [], a)
        C.save(weights, cfg, [], b)
        assert a.read_bytes() == b.read_bytes()

    def test_prune_record_round_trip(self, tmp_path):
        weights, cfg = make_model(2, num_layers=4)
        pruned, new_cfg, record = prune_checkpoint(
            weights, cfg, PruneSpec("middle", 2), source="m.ckpt",
            timestamp="2026-01-02T03:04:05Z")
        path = tmp_path / "p.ckpt"
        C.save(pruned, new_cfg, [record], path)
        _, _, records = C.load(path)
        assert records == [record]

    def test_headless_round_trip(self, tmp_path):
        weights, cfg = make_model(3)
        headless_cfg = replace(cfg, num_classes=None)
        weights.classifier_weight = None
        weights.classifier_bias = None
        path = tmp_path / "h.ckpt"
        C.save(weights, headless_cfg, [], path)
        loaded, loaded_cfg, _ = C.load(path)
        assert loaded_cfg.num_classes is None
        assert loaded.classifier_weight is None

    def test_float64_load_for_grad_checking(self, tmp_path):
        weights, cfg = make_model(4)
        path = tmp_path / "m.ckpt"
        C.save(weights, cfg, [], path)
        loaded, _, _ = C.load(path, dtype=np.float64)
        assert loaded.token_embeddings.dtype == np.float64
        assert np.array_equal(
            loaded.token_embeddings.astype(np.float32), weights.token_embeddings)

    @pytest.mark.parametrize("seed", range(4))
    def test_random_models_round_trip_bitwise(self, tmp_path, seed):
        rng = np.random.default_rng(seed)
        weights, cfg = make_model(seed, num_layers=int(rng.integers(1, 5)))
        path = tmp_path / "m.ckpt"
        C.save(weights, cfg, [], path)
        loaded, _, _ = C.load(path)
        assert_weights_equal(weights, loaded)


class TestLayout:
    def test_header_structure(self, tmp_path):
        weights, cfg = make_model(5)
        path = tmp_path / "m.ckpt"
        C.save(weights, cfg, [], path)
        raw = path.read_bytes()
        assert raw[:6] == b"PRNC1\n"
        (hlen,) = struct.unpack_from("<Q", raw, 6)
        header = json.loads(raw[14:14 + hlen])
        assert header["format_version"] == 1
        assert header["model_config"]["num_layers"] == 2
        table = header["tensors"]
        assert set(table) == set(M.tensor_names(cfg))
        # f32 [2,3]-style check: byte lengths are 4 x element count
        assert table["pooler.weight"]["byte_length"] == 8 * 8 * 4
        # offsets aligned and ascending in name order
        offsets = [table[n]["byte_offset"] for n in sorted(table)]
        assert all(o % 64 == 0 for o in offsets)
        assert offsets == sorted(offsets)
        ends = [o + table[n]["byte_length"]
                for o, n in zip(offsets, sorted(table))]
        assert all(ends[i] <= offsets[i + 1] for i in range(len(ends) - 1))
        assert ends[-1] == len(raw) - 14 - hlen

    def test_byte_length_rule(self, tmp_path):
        weights, cfg = make_model(6)
        path = tmp_path / "m.ckpt"
        C.save(weights, cfg, [], path)
        raw = path.read_bytes()
        (hlen,) = struct.unpack_from("<Q", raw, 6)
        table = json.loads(raw[14:14 + hlen])["tensors"]
        entry = table["classifier.weight"]  # shape [4, 8] f32
        assert entry["shape"] == [4, 8]
        assert entry["byte_length"] == 4 * 8 * 4


def _corrupt(path, tmp_path, mutate):
    raw = bytearray(path.read_bytes())
    (hlen,) = struct.unpack_from("<Q", raw, 6)
    header = json.loads(raw[14:14 + hlen])
    payload = bytes(raw[14 + hlen:])
    header, payload = mutate(header, payload)
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    out = tmp_path / "corrupt.ckpt"
    out.write_bytes(b"PRNC1\n" + struct.pack("<Q", len(hb)) + hb + payload)
    return out


class TestCorruption:
    @pytest.fixture
    def saved(self, tmp_path):
        weights, cfg = make_model(7)
        path = tmp_path / "m.ckpt"
        C.save(weights, cfg, [], path)
        return path

    def test_bad_magic(self, saved, tmp_path):
        raw = bytearray(saved.read_bytes())
        raw[:6] = b"NOPE1\n"
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(bytes(raw))
        with pytest.raises(C.BadMagicError):
            C.load(bad)

    def test_unsupported_version(self, saved, tmp_path):
        def mutate(header, payload):
            header["format_version"] = 99
            return header, payload
        with pytest.raises(C.UnsupportedVersionError):
            C.load(_corrupt(saved, tmp_path, mutate))

    def test_missing_tensor(self, saved, tmp_path):
        def mutate(header, payload):
            del header["tensors"]["pooler.weight"]
            return header, payload
        with pytest.raises(C.MissingTensorError, match="pooler.weight"):
            C.load(_corrupt(saved, tmp_path, mutate))

    def test_shape_mismatch(self, saved, tmp_path):
        def mutate(header, payload):
            header["tensors"]["pooler.bias"]["shape"] = [9]
            return header, payload
        with pytest.raises(C.ShapeMismatchError, match="pooler.bias"):
            C.load(_corrupt(saved, tmp_path, mutate))

    def test_truncated_payload(self, saved, tmp_path):
        def mutate(header, payload):
            return header, payload[: len(payload) // 2]
        with pytest.raises(C.TruncatedPayloadError, match="byte_length exceeds file"):
            C.load(_corrupt(saved, tmp_path, mutate))

    def test_garbage_header(self, saved, tmp_path):
        raw = bytearray(saved.read_bytes())
        raw[20] = 0xFF
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(bytes(raw))
        with pytest.raises(C.CheckpointError):
            C.load(bad)


class TestValidate:
    def test_fresh_model_is_clean(self):
        weights, cfg = make_model(8)
        assert C.validate(weights, cfg) == []

    def test_layer_count_mismatch_is_one_violation(self):
        weights, cfg = make_model(9, num_layers=3)
        weights.layers = weights.layers[:2]
        violations = C.validate(weights, cfg)
        assert len(violations) == 1
        assert "layer" in violations[0]

    def test_nan_named(self):
        weights, cfg = make_model(10)
        weights.layers[1].up_weight[0, 0] = np.nan
        violations = C.validate(weights, cfg)
        assert violations == ["non-finite values in tensor encoder.layer.1.ffn.up.weight"]

    def test_shape_violation(self):
        weights, cfg = make_model(11)
        weights.pooler_bias = np.zeros(3, dtype=np.float32)
        violations = C.validate(weights, cfg)
        assert any("pooler.bias" in v and "shape" in v for v in violations)

    def test_missing_classifier_flagged(self):
        weights, cfg = make_model(12)
        weights.classifier_weight = None
        weights.classifier_bias = None
        violations = C.validate(weights, cfg)
        assert sorted(violations) == [
            "missing tensor classifier.bias", "missing tensor classifier.weight"]
