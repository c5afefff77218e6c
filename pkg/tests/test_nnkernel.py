from __future__ import annotations

import numpy as np
import pytest

from solsearch.nn import (
    Adam,
    CheckpointError,
    ModelConfig,
    ParameterStore,
    backward,
    check_gradients,
    constant,
    cosine,
    cosine_t,
    load_checkpoint,
    masked_softmax,
    multi_head_attention,
    positional_encoding,
    ranking_loss,
    save_checkpoint,
    scaled_attention,
    transformer_block,
    lstm_sequence,
    layer_norm,
)
from solsearch.nn.layers import attention_param_names
from solsearch.frontend import Vocabulary


def _attention_store(d: int, heads: int, seed=0) -> ParameterStore:
    store = ParameterStore(seed=seed)
    dk = d // heads
    for j in range(heads):
        for w in ("wq", "wk", "wv"):
            store.create(f"t/h{j}/{w}", (d, dk), fan_in=d)
    return store


def _block_store(d: int, heads: int, seed=0) -> ParameterStore:
    store = _attention_store(d, heads, seed)
    store.create("t/norm1/gain", (1, d), init="ones")
    store.create("t/norm1/bias", (1, d), init="zeros")
    store.create("t/ffn/w1", (d, 4 * d), fan_in=d)
    store.create("t/ffn/b1", (1, 4 * d), init="zeros")
    store.create("t/ffn/w2", (4 * d, d), fan_in=4 * d)
    store.create("t/ffn/b2", (1, d), init="zeros")
    store.create("t/norm2/gain", (1, d), init="ones")
    store.create("t/norm2/bias", (1, d), init="zeros")
    return store


def _lstm_store(d: int, hidden: int, seed=0) -> ParameterStore:
    store = ParameterStore(seed=seed)
    for gate in ("i", "f", "g", "o"):
        store.create(f"l/{gate}/wx", (d, hidden), fan_in=d)
        store.create(f"l/{gate}/wh", (hidden, hidden), fan_in=hidden)
        store.create(f"l/{gate}/b", (1, hidden), init="zeros")
    return store


class TestPositionalEncoding:
    def test_row_zero(self):
        pe = positional_encoding(3, 4)
        np.testing.assert_allclose(pe[0], [0.0, 1.0, 0.0, 1.0])

    def test_sin_one(self):
        pe = positional_encoding(2, 6)
        assert pe[1, 0] == pytest.approx(np.sin(1.0), abs=1e-15)

    def test_pythagorean_identity(self):
        pe = positional_encoding(50, 16)
        squares = pe[:, 0::2] ** 2 + pe[:, 1::2] ** 2
        np.testing.assert_allclose(squares, 1.0, atol=1e-12)

    def test_odd_width_rejected(self):
        with pytest.raises(ValueError, match="even"):
            positional_encoding(4, 5)

    def test_zero_positions_rejected(self):
        with pytest.raises(ValueError):
            positional_encoding(0, 4)


class TestScaledAttention:
    def test_single_position_identity(self):
        q = k = v = constant([[1.0]])
        out = scaled_attention(q, k, v)
        np.testing.assert_allclose(out.data, [[1.0]])

    def test_two_identical_keys_average_values(self):
        q = constant([[1.0, 0.0]])
        k = constant([[1.0, 1.0], [1.0, 1.0]])
        v = constant([[2.0, 0.0], [0.0, 4.0]])
        out = scaled_attention(q, k, v)
        np.testing.assert_allclose(out.data, [[1.0, 2.0]])

    def test_masked_key_gets_zero_weight(self):
        scores = constant([[0.3, 5.0]])
        weights = masked_softmax(scores, np.array([True, False]))
        np.testing.assert_allclose(weights.data, [[1.0, 0.0]])
        assert weights.data[0, 1] == 0.0

    def test_all_masked_rejected(self):
        with pytest.raises(ValueError, match="masked"):
            masked_softmax(constant([[1.0, 2.0]]), np.array([False, False]))

    def test_rows_sum_to_one_under_random_masks(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(2, 9))
            scores = constant(rng.normal(size=(4, n)) * 5)
            mask = rng.random(n) < 0.7
            if not mask.any():
                mask[0] = True
            weights = masked_softmax(scores, mask)
            np.testing.assert_allclose(weights.data.sum(axis=1), 1.0, atol=1e-9)
            assert (weights.data[:, ~mask] == 0.0).all()


class TestMultiHeadAttention:
    def test_single_head_reduces_to_scaled_attention(self):
        d = 6
        store = _attention_store(d, heads=1, seed=4)
        x = constant(np.random.default_rng(0).normal(size=(3, d)))
        out = multi_head_attention(x, store, "t", 1)
        q = x.data @ store["t/h0/wq"].data
        k = x.data @ store["t/h0/wk"].data
        v = x.data @ store["t/h0/wv"].data
        expected = scaled_attention(constant(q), constant(k), constant(v)).data
        np.testing.assert_allclose(out.data, expected)

    def test_output_width_heads_times_head_dim(self):
        store = ParameterStore(seed=1)
        d, dk, heads = 32, 16, 8
        for j in range(heads):
            for w in ("wq", "wk", "wv"):
                store.create(f"t/h{j}/{w}", (d, dk), fan_in=d)
        x = constant(np.random.default_rng(0).normal(size=(5, d)))
        out = multi_head_attention(x, store, "t", heads)
        assert out.shape == (5, heads * dk)
        assert heads * dk == 128

    def test_missing_parameters_listed(self):
        store = ParameterStore(seed=0)
        x = constant(np.zeros((2, 4)))
        with pytest.raises(KeyError, match="t/h0/wq"):
            multi_head_attention(x, store, "t", 1)

    def test_row_permutation_equivariance(self):
        # without position codes, swapping two input rows swaps the outputs
        d = 8
        store = _attention_store(d, heads=2, seed=7)
        rng = np.random.default_rng(3)
        x = rng.normal(size=(3, d))
        out = multi_head_attention(constant(x), store, "t", 2).data
        perm = [1, 0, 2]
        out_perm = multi_head_attention(constant(x[perm]), store, "t", 2).data
        np.testing.assert_allclose(out_perm, out[perm], atol=1e-12)


class TestTransformerBlock:
    def test_layer_norm_statistics(self):
        rng = np.random.default_rng(5)
        x = constant(rng.normal(size=(4, 16)) * 3 + 2)
        gain = constant(np.ones((1, 16)))
        bias = constant(np.zeros((1, 16)))
        out = layer_norm(x, gain, bias).data
        np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-9)
        np.testing.assert_allclose(out.var(axis=1), 1.0, atol=1e-4)

    def test_zero_input_zero_attention_branch(self):
        d = 8
        store = _block_store(d, heads=2, seed=2)
        x = constant(np.zeros((3, d)))
        att = multi_head_attention(x, store, "t", 2)
        np.testing.assert_allclose(att.data, 0.0)

    def test_gradients_match_finite_differences(self):
        d, heads = 8, 2
        store = _block_store(d, heads, seed=3)
        rng = np.random.default_rng(1)
        x = constant(rng.normal(size=(3, d)))
        target = constant(rng.normal(size=(1, d)))
        mask = np.array([True, True, False])

        def loss():
            vec, _ = transformer_block(x, store, "t", heads, mask)
            return cosine_t(vec, target)

        errors = check_gradients(loss, store)
        assert max(errors.values()) < 1e-4

    def test_pooled_output_is_row_vector(self):
        d = 8
        store = _block_store(d, heads=2, seed=9)
        x = constant(np.random.default_rng(0).normal(size=(5, d)))
        vec, seq = transformer_block(x, store, "t", 2)
        assert vec.shape == (1, d)
        assert seq.shape == (5, d)


class TestLstm:
    def test_zero_parameters_zero_hidden(self):
        store = ParameterStore(seed=0)
        for gate in ("i", "f", "g", "o"):
            store.create(f"l/{gate}/wx", (4, 3), init="zeros")
            store.create(f"l/{gate}/wh", (3, 3), init="zeros")
            store.create(f"l/{gate}/b", (1, 3), init="zeros")
        xs = constant(np.random.default_rng(0).normal(size=(5, 4)))
        out = lstm_sequence(xs, store, "l", 3)
        np.testing.assert_allclose(out.data, 0.0)

    def test_single_step_is_one_cell(self):
        store = _lstm_store(4, 3, seed=6)
        x = np.random.default_rng(2).normal(size=(1, 4))
        out = lstm_sequence(constant(x), store, "l", 3).data

        def sig(z):
            return 1.0 / (1.0 + np.exp(-z))

        gates = {}
        for gate in ("i", "f", "g", "o"):
            pre = x @ store[f"l/{gate}/wx"].data + store[f"l/{gate}/b"].data
            gates[gate] = np.tanh(pre) if gate == "g" else sig(pre)
        c = gates["i"] * gates["g"]
        expected = gates["o"] * np.tanh(c)
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_gradients_match_finite_differences(self):
        store = _lstm_store(5, 4, seed=8)
        rng = np.random.default_rng(4)
        xs = constant(rng.normal(size=(3, 5)))
        target = constant(rng.normal(size=(1, 4)))

        def loss():
            return cosine_t(lstm_sequence(xs, store, "l", 4), target)

        errors = check_gradients(loss, store)
        assert max(errors.values()) < 1e-4


class TestCosineAndLoss:
    def test_identity(self):
        assert cosine([1.0, 0.0], [1.0, 0.0]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)

    def test_reference_value(self):
        assert cosine([1, 2, 3], [4, 5, 6]) == pytest.approx(0.9746318461970762, abs=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError, match="zero"):
            cosine([0.0, 0.0], [1.0, 0.0])

    def test_scale_invariance(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            v1 = rng.normal(size=5)
            v2 = rng.normal(size=5)
            a, b = rng.uniform(0.1, 10, size=2)
            assert cosine(a * v1, b * v2) == pytest.approx(cosine(v1, v2), abs=1e-12)

    def test_loss_zero_when_margin_satisfied(self):
        # cos+ = 1 with itself-like vector, cos- = 0 orthogonal
        code = constant([[1.0, 0.0]])
        pos = constant([[2.0, 0.0]])
        neg = constant([[0.0, 3.0]])
        assert ranking_loss(code, pos, neg, 0.05).item() == 0.0

    def test_loss_equals_margin_for_equal_docs(self):
        code = constant([[0.3, 0.7]])
        doc = constant([[1.0, 2.0]])
        assert ranking_loss(code, doc, doc, 0.05).item() == pytest.approx(0.05, abs=1e-15)

    def test_loss_reference_value(self):
        # cos+ = 0.2, cos- = 0.3 built from planar vectors at known angles
        code = constant([[1.0, 0.0]])
        pos = constant([[0.2, np.sqrt(1 - 0.04)]])
        neg = constant([[0.3, np.sqrt(1 - 0.09)]])
        assert ranking_loss(code, pos, neg, 0.05).item() == pytest.approx(0.15, abs=1e-12)

    def test_loss_nonnegative_random(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            vectors = rng.normal(size=(3, 4))
            loss = ranking_loss(
                constant(vectors[0][None]), constant(vectors[1][None]),
                constant(vectors[2][None]), 0.05,
            ).item()
            assert loss >= 0.0

    def test_loss_gradcheck(self):
        store = ParameterStore(seed=13)
        code = store.create("code", (1, 6), fan_in=6)
        pos = store.create("pos", (1, 6), fan_in=6)
        neg = store.create("neg", (1, 6), fan_in=6)
        # nudge so the hinge is strictly active (nonzero gradient region)
        neg.data = pos.data * 0.9 + 0.1

        def loss():
            return ranking_loss(code, pos, neg, 0.5)

        errors = check_gradients(loss, store)
        assert max(errors.values()) < 1e-4


class TestAdam:
    def test_zero_gradients_no_movement(self):
        store = ParameterStore(seed=0)
        p = store.create("p", (3,), fan_in=3)
        before = p.data.copy()
        Adam().step(store, {"p": np.zeros(3)})
        np.testing.assert_array_equal(p.data, before)

    def test_descent_direction(self):
        store = ParameterStore(seed=0)
        p = store.create("p", (1,), init="ones")
        Adam(lr=0.1).step(store, {"p": 2 * p.data})
        assert abs(p.data[0]) < 1.0

    def test_quadratic_convergence(self):
        store = ParameterStore(seed=0)
        p = store.create("p", (2,), init="ones")
        optimizer = Adam(lr=0.05)
        for _ in range(200):
            optimizer.step(store, {"p": 2 * p.data})
        assert np.linalg.norm(p.data) < 1e-2

    def test_nan_gradient_names_parameter(self):
        store = ParameterStore(seed=0)
        store.create("weights/w", (2,), init="ones")
        with pytest.raises(ValueError, match="weights/w"):
            Adam().step(store, {"weights/w": np.array([np.nan, 0.0])})

    def test_gradient_name_mismatch(self):
        store = ParameterStore(seed=0)
        store.create("a", (1,), init="ones")
        with pytest.raises(ValueError, match="mismatch"):
            Adam().step(store, {"b": np.zeros(1)})


class TestCheckpoint:
    def _store(self, seed=0):
        store = ParameterStore(seed=seed)
        store.create("a/w", (3, 4), fan_in=3)
        store.create("a/b", (1, 4), init="zeros")
        store.create("scalarish", (2,), fan_in=2)
        return store

    def test_round_trip_bit_exact(self, tmp_path):
        store = self._store(seed=5)
        config = ModelConfig(embed_dim=8, text_heads=2, graph_heads=2, out_dim=16)
        vocab = Vocabulary(words=("<pad>", "<unk>", "alpha", "beta"))
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, store, config, vocab)
        loaded, config2, vocab2 = load_checkpoint(path)
        assert config2 == config
        assert vocab2.words == vocab.words
        assert loaded.names() == store.names()
        for name, t in store.items():
            np.testing.assert_array_equal(loaded[name].data, t.data)

    def test_save_is_deterministic(self, tmp_path):
        config = ModelConfig(embed_dim=8, text_heads=2, graph_heads=2, out_dim=16)
        vocab = Vocabulary(words=("<pad>", "<unk>"))
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(p1, self._store(seed=5), config, vocab)
        save_checkpoint(p2, self._store(seed=5), config, vocab)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTMAGIC" + b"\0" * 32)
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_truncation_reports_offset(self, tmp_path):
        store = self._store()
        config = ModelConfig(embed_dim=8, text_heads=2, graph_heads=2, out_dim=16)
        vocab = Vocabulary(words=("<pad>", "<unk>"))
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, store, config, vocab)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 7])
        with pytest.raises(CheckpointError, match="offset"):
            load_checkpoint(path)

    def test_same_seed_same_initialization(self):
        a = self._store(seed=9)
        b = self._store(seed=9)
        for name in a.names():
            np.testing.assert_array_equal(a[name].data, b[name].data)


class TestModelConfig:
    def test_defaults_match_contract(self):
        config = ModelConfig()
        assert config.text_heads == 8
        assert config.graph_heads == 8
        assert config.margin == 0.05
        assert config.out_dim == 768

    def test_head_width_divides_model_width(self):
        with pytest.raises(ValueError, match="divisible"):
            ModelConfig(embed_dim=30, text_heads=8)

    def test_odd_width_rejected(self):
        with pytest.raises(ValueError, match="even"):
            ModelConfig(embed_dim=9, text_heads=3)

    def test_bad_modalities_rejected(self):
        with pytest.raises(ValueError, match="modalities"):
            ModelConfig(modalities=("T", "X"))

    def test_round_trip(self):
        config = ModelConfig(embed_dim=16, text_heads=4, out_dim=32, modalities=("T",))
        assert ModelConfig.from_dict(config.to_dict()) == config
