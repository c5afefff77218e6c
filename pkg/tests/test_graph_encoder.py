from __future__ import annotations

import numpy as np
import pytest

from solsearch.cedg import Cedg, CedgEdge, CedgNode, build_cedg
from solsearch.encoder import build_parameters
from solsearch.frontend import build_vocabulary
from solsearch.graph_encoder import (
    GraphState,
    encode_graph,
    graph_readout,
    init_edge_vector,
    init_node_vector,
    init_state,
    triple_forward,
)
from solsearch.nn import check_gradients, constant, cosine_t
from solsearch.nn.params import ModelConfig


@pytest.fixture()
def graph_setup(tiny_config, small_vocab):
    store = build_parameters(tiny_config, small_vocab, seed=3)
    return store, tiny_config, small_vocab


def _triangle() -> Cedg:
    nodes = (
        CedgNode(0, "Invocation", "public", "f"),
        CedgNode(1, "Variable", "uint", "amount"),
        CedgNode(2, "Variable", "mapping", "deposits"),
    )
    edges = (
        CedgEdge(0, 1, "BS", 1),
        CedgEdge(1, 2, "AS", 2),
        CedgEdge(1, 1, "AC", 3),
        CedgEdge(2, 0, "NS", 4),
    )
    return Cedg(nodes=nodes, edges=edges)


class TestInitVectors:
    def test_identical_attributes_identical_vectors(self, graph_setup):
        store, config, vocab = graph_setup
        a = CedgNode(0, "Variable", "uint", "amount")
        b = CedgNode(7, "Variable", "uint", "amount")
        va = init_node_vector(a, vocab, store, config)
        vb = init_node_vector(b, vocab, store, config)
        np.testing.assert_array_equal(va.data, vb.data)

    def test_fallback_vector_ignores_vocabulary(self, graph_setup):
        store, config, vocab = graph_setup
        other_vocab = build_vocabulary([["entirely", "different", "words"]], min_count=1)
        node = CedgNode(0, "Fallback", "fallback", "0")
        va = init_node_vector(node, vocab, store, config)
        vb = init_node_vector(node, other_vocab, store, config)
        np.testing.assert_array_equal(va.data, vb.data)

    def test_node_vector_width(self, graph_setup):
        store, config, vocab = graph_setup
        node = CedgNode(0, "Invocation", "public", "transfer")
        assert init_node_vector(node, vocab, store, config).shape == (1, config.embed_dim)

    def test_unknown_type_string_tolerated(self, graph_setup):
        store, config, vocab = graph_setup
        node = CedgNode(0, "Variable", "weird_custom_struct", "x")
        vec = init_node_vector(node, vocab, store, config)
        assert np.isfinite(vec.data).all()

    def test_edge_vector_same_type_same_order_identical(self, graph_setup):
        store, config, _ = graph_setup
        a = init_edge_vector(CedgEdge(0, 1, "AS", 3), store, config, max_order=5)
        b = init_edge_vector(CedgEdge(2, 4, "AS", 3), store, config, max_order=5)
        np.testing.assert_array_equal(a.data, b.data)

    def test_edge_vector_differs_by_order(self, graph_setup):
        store, config, _ = graph_setup
        a = init_edge_vector(CedgEdge(0, 1, "AS", 1), store, config, max_order=5)
        b = init_edge_vector(CedgEdge(0, 1, "AS", 2), store, config, max_order=5)
        assert not np.array_equal(a.data, b.data)

    def test_edge_vector_width(self, graph_setup):
        store, config, _ = graph_setup
        e = init_edge_vector(CedgEdge(0, 1, "FB", 1), store, config, max_order=2)
        assert e.shape == (1, config.embed_dim)


class TestTripleForward:
    def test_single_triple_weight_one(self, graph_setup):
        store, config, vocab = graph_setup
        g = Cedg(
            nodes=(
                CedgNode(0, "Invocation", "public", "f"),
                CedgNode(1, "Variable", "uint", "x"),
            ),
            edges=(CedgEdge(0, 1, "BS", 1),),
        )
        state = triple_forward(g, init_state(g, vocab, store, config), store, config)
        for alpha in state.attention_weights:
            np.testing.assert_allclose(alpha.data, 1.0)

    def test_equal_scores_split_evenly(self, graph_setup):
        store, config, vocab = graph_setup
        g = Cedg(
            nodes=(
                CedgNode(0, "Invocation", "public", "f"),
                CedgNode(1, "Variable", "uint", "x"),
            ),
            edges=(CedgEdge(0, 1, "AS", 1), CedgEdge(0, 1, "AS", 2)),
        )
        state = init_state(g, vocab, store, config)
        # force identical edge vectors so both triples score identically
        state = GraphState(
            graph=g,
            node_vectors=state.node_vectors,
            edge_vectors=constant(np.tile(state.edge_vectors.data[:1], (2, 1))),
        )
        state = triple_forward(g, state, store, config)
        for alpha in state.attention_weights:
            np.testing.assert_allclose(alpha.data, 0.5, atol=1e-12)

    def test_weights_normalize_per_node_on_golden_graph(
        self, graph_setup, withdraw_unit, vault_units
    ):
        store, config, vocab = graph_setup
        g = build_cedg(withdraw_unit, vault_units)
        state = triple_forward(g, init_state(g, vocab, store, config), store, config)
        vs = np.array([e.vs for e in g.edges])
        for alpha in state.attention_weights:
            for node in set(vs.tolist()):
                total = alpha.data[vs == node].sum()
                assert total == pytest.approx(1.0, abs=1e-9)

    def test_edge_list_order_irrelevant(self, graph_setup):
        store, config, vocab = graph_setup
        g = _triangle()
        shuffled = Cedg(nodes=g.nodes, edges=tuple(reversed(g.edges)))
        out_a = triple_forward(g, init_state(g, vocab, store, config), store, config)
        out_b = triple_forward(
            shuffled, init_state(shuffled, vocab, store, config), store, config
        )
        np.testing.assert_allclose(
            out_a.node_vectors.data, out_b.node_vectors.data, atol=1e-12
        )

    def test_isolated_node_keeps_input_vector(self, graph_setup):
        store, config, vocab = graph_setup
        g = Cedg(
            nodes=(
                CedgNode(0, "Invocation", "public", "f"),
                CedgNode(1, "Variable", "uint", "x"),
            ),
            edges=(CedgEdge(0, 1, "BS", 1),),  # node 1 has no outgoing edge
        )
        before = init_state(g, vocab, store, config)
        after = triple_forward(g, before, store, config)
        np.testing.assert_array_equal(
            after.node_vectors.data[1], before.node_vectors.data[1]
        )
        assert not np.array_equal(
            after.node_vectors.data[0], before.node_vectors.data[0]
        )

    def test_edgeless_graph_passthrough(self, graph_setup):
        store, config, vocab = graph_setup
        g = Cedg(nodes=(CedgNode(0, "Invocation", "public", "f"),), edges=())
        state = init_state(g, vocab, store, config)
        after = triple_forward(g, state, store, config)
        np.testing.assert_array_equal(after.node_vectors.data, state.node_vectors.data)


class TestReadout:
    def test_output_width(self, graph_setup):
        store, config, vocab = graph_setup
        vec = encode_graph(_triangle(), vocab, store, config)
        assert vec.shape == (1, config.embed_dim)

    def test_node_order_sensitivity(self, graph_setup):
        store, config, vocab = graph_setup
        g = _triangle()
        swapped = Cedg(
            nodes=(
                g.nodes[0],
                CedgNode(1, "Variable", "mapping", "deposits"),
                CedgNode(2, "Variable", "uint", "amount"),
            ),
            edges=g.edges,
        )
        a = encode_graph(g, vocab, store, config)
        b = encode_graph(swapped, vocab, store, config)
        assert not np.allclose(a.data, b.data)

    def test_padding_slots_zero(self, graph_setup):
        store, config, vocab = graph_setup
        g = Cedg(nodes=(CedgNode(0, "Invocation", "public", "f"),), edges=())
        state = init_state(g, vocab, store, config)
        # padded flat input reproduced by hand: one node then zero slots
        manual = np.zeros((1, config.max_graph_nodes * config.embed_dim))
        manual[0, : config.embed_dim] = state.node_vectors.data[0]
        expected = manual @ store["graph/readout/w"].data + store["graph/readout/b"].data
        np.testing.assert_allclose(
            graph_readout(state, store, config).data, expected, atol=1e-12
        )

    def test_oversized_graph_truncated_with_warning(self, graph_setup, caplog):
        store, config, vocab = graph_setup
        n = config.max_graph_nodes + 3
        nodes = tuple(CedgNode(i, "Variable", "uint", f"v{i}") for i in range(n))
        g = Cedg(nodes=nodes, edges=())
        state = init_state(g, vocab, store, config)
        with caplog.at_level("WARNING"):
            vec = graph_readout(state, store, config)
        assert vec.shape == (1, config.embed_dim)
        assert any("truncated" in r.message for r in caplog.records)


class TestGradients:
    def test_graph_attention_gradcheck(self, small_vocab):
        config = ModelConfig(
            embed_dim=8, text_heads=2, graph_heads=2, out_dim=16, max_graph_nodes=4
        )
        store = build_parameters(config, small_vocab, seed=11)
        g = _triangle()
        rng = np.random.default_rng(0)
        target = constant(rng.normal(size=(1, config.embed_dim)))

        def loss():
            return cosine_t(encode_graph(g, small_vocab, store, config), target)

        graph_params = [n for n in store.names() if n.startswith("graph/")]
        errors = check_gradients(loss, store, names=graph_params + ["code/word"])
        assert max(errors.values()) < 1e-4
