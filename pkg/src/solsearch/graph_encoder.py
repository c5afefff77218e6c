"""Edge-aware graph attention over dependency graphs.

Each directed edge forms a triple (start vector, end vector, edge vector).
Per attention head, a triple is projected to a shared width, scored with a
LeakyRelu-activated linear form, normalized by softmax across all triples
that leave the same start node, and aggregated back onto that node. Heads
are averaged and passed through an ELU. Nodes with no outgoing edge keep
their input vector. A final readout concatenates node vectors in id order
into a fixed number of slots and projects down to the model width.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cedg import Cedg, CedgEdge, CedgNode, EDGE_TYPES, NODE_CATEGORIES, SOL_TYPES
from .frontend import Vocabulary, normalize_words
from .nn.layers import positional_encoding
from .nn.params import ModelConfig, ParameterStore
from .nn.tensor import (
    Tensor,
    concat,
    constant,
    div,
    elu,
    exp,
    leaky_relu,
    matmul,
    mean_rows,
    mul,
    reshape,
    rows,
)

__all__ = [
    "GraphState",
    "init_node_vector",
    "init_edge_vector",
    "triple_forward",
    "graph_readout",
    "encode_graph",
    "graph_param_names",
]

logger = logging.getLogger(__name__)

_CATEGORY_INDEX = {c: i for i, c in enumerate(NODE_CATEGORIES)}
_SOL_TYPE_INDEX = {t: i for i, t in enumerate(SOL_TYPES)}
_ETYPE_INDEX = {t: i for i, t in enumerate(EDGE_TYPES)}


@dataclass
class GraphState:
    """Vectors attached to one graph during the forward pass."""

    graph: Cedg
    node_vectors: Tensor  # (nodes, width)
    edge_vectors: Tensor | None  # (edges, width) or None for edgeless graphs
    triple_vectors: list[Tensor] = field(default_factory=list)  # per head
    attention_weights: list[Tensor] = field(default_factory=list)  # per head


def graph_param_names(config: ModelConfig) -> list[str]:
    names = [
        "graph/cat", "graph/soltype", "graph/fallback_name", "graph/etype",
        "graph/node_proj/w", "graph/node_proj/b",
        "graph/readout/w", "graph/readout/b",
    ]
    for m in range(config.graph_heads):
        names += [f"graph/h{m}/w1", f"graph/h{m}/w2"]
    return names


def init_node_vector(node: CedgNode, vocab: Vocabulary, store: ParameterStore,
                     config: ModelConfig) -> Tensor:
    """Initial (1, width) vector: category + type lookups + name words.

    Unknown type strings fall back to the "unknown" slot; the Fallback
    node's nameless slot uses a dedicated learned vector, independent of
    the word vocabulary.
    """
    width = config.embed_dim
    cat = rows(store["graph/cat"], [_CATEGORY_INDEX[node.category]])
    sol = rows(
        store["graph/soltype"],
        [_SOL_TYPE_INDEX.get(node.sol_type, _SOL_TYPE_INDEX["unknown"])],
    )
    if node.category == "Fallback":
        name_vec = store["graph/fallback_name"]
    else:
        ids = vocab.encode(normalize_words(node.name))
        if ids:
            name_vec = mean_rows(rows(store["code/word"], ids))
        else:
            name_vec = constant(np.zeros((1, width)))
    packed = concat([cat, sol, name_vec], axis=1)
    return matmul(packed, store["graph/node_proj/w"]) + store["graph/node_proj/b"]


def init_edge_vector(edge: CedgEdge, store: ParameterStore,
                     config: ModelConfig, max_order: int) -> Tensor:
    """Initial (1, width) edge vector: type lookup plus its order position."""
    pe = positional_encoding(max_order + 1, config.embed_dim)
    type_vec = rows(store["graph/etype"], [_ETYPE_INDEX[edge.etype]])
    return type_vec + constant(pe[edge.order][None, :])


def init_state(g: Cedg, vocab: Vocabulary, store: ParameterStore,
               config: ModelConfig) -> GraphState:
    if not g.nodes:
        raise ValueError("cannot embed a graph with no nodes")
    node_vecs = concat(
        [init_node_vector(n, vocab, store, config) for n in g.nodes], axis=0
    )
    edge_vecs = None
    if g.edges:
        max_order = max(e.order for e in g.edges)
        pe = positional_encoding(max_order + 1, config.embed_dim)
        type_ids = [_ETYPE_INDEX[e.etype] for e in g.edges]
        order_pe = np.stack([pe[e.order] for e in g.edges])
        edge_vecs = rows(store["graph/etype"], type_ids) + constant(order_pe)
    return GraphState(graph=g, node_vectors=node_vecs, edge_vectors=edge_vecs)


def triple_forward(g: Cedg, state: GraphState, store: ParameterStore,
                   config: ModelConfig) -> GraphState:
    """One propagation round; returns the state with updated node vectors."""
    if config.graph_heads < 1:
        raise ValueError("graph_heads must be >= 1")
    if not g.edges:
        return state  # every node is isolated and keeps its vector

    n_nodes = len(g.nodes)
    vs_idx = np.array([e.vs for e in g.edges], dtype=np.intp)
    ve_idx = np.array([e.ve for e in g.edges], dtype=np.intp)

    h = state.node_vectors
    triples = concat(
        [rows(h, vs_idx), rows(h, ve_idx), state.edge_vectors], axis=1
    )  # (edges, 3*width)

    # membership matrix: S[i, e] = 1 iff edge e starts at node i
    select = np.zeros((n_nodes, len(g.edges)))
    select[vs_idx, np.arange(len(g.edges))] = 1.0
    select_c = constant(select)

    head_sums: Tensor | None = None
    triple_vectors: list[Tensor] = []
    attention_weights: list[Tensor] = []
    for m in range(config.graph_heads):
        c = matmul(triples, store[f"graph/h{m}/w1"])  # (edges, width)
        b = leaky_relu(matmul(c, store[f"graph/h{m}/w2"]))  # (edges, 1)
        # per-segment max shift (a constant offset leaves softmax unchanged)
        seg_max = np.full(n_nodes, -np.inf)
        np.maximum.at(seg_max, vs_idx, b.data[:, 0])
        shifted = b - constant(seg_max[vs_idx][:, None])
        e_b = exp(shifted)
        denom_per_node = matmul(select_c, e_b)  # (nodes, 1)
        denom_per_edge = rows(denom_per_node, vs_idx)
        alpha = div(e_b, denom_per_edge)  # (edges, 1)
        aggregated = matmul(select_c, mul(alpha, c))  # (nodes, width)
        head_sums = aggregated if head_sums is None else head_sums + aggregated
        triple_vectors.append(c)
        attention_weights.append(alpha)

    updated = elu(mul(head_sums, 1.0 / config.graph_heads))
    # nodes without outgoing edges keep their input vector
    isolated = np.ones((n_nodes, 1))
    isolated[vs_idx] = 0.0
    merged = mul(constant(isolated), h) + mul(constant(1.0 - isolated), updated)
    return GraphState(
        graph=g,
        node_vectors=merged,
        edge_vectors=state.edge_vectors,
        triple_vectors=triple_vectors,
        attention_weights=attention_weights,
    )


def graph_readout(state: GraphState, store: ParameterStore,
                  config: ModelConfig) -> Tensor:
    """Concatenate node vectors in id order into fixed slots, then project."""
    h = state.node_vectors
    n_nodes, width = h.shape
    slots = config.max_graph_nodes
    if n_nodes > slots:
        logger.warning(
            "graph with %d nodes truncated to %d slots", n_nodes, slots
        )
        h = rows(h, np.arange(slots))
        n_nodes = slots
    if n_nodes < slots:
        padding = constant(np.zeros((slots - n_nodes, width)))
        h = concat([h, padding], axis=0)
    flat = reshape(h, (1, slots * width))
    return matmul(flat, store["graph/readout/w"]) + store["graph/readout/b"]


def encode_graph(g: Cedg, vocab: Vocabulary, store: ParameterStore,
                 config: ModelConfig) -> Tensor:
    """Full graph embedding: init, ``hops`` propagation rounds, readout."""
    state = init_state(g, vocab, store, config)
    for _ in range(config.hops):
        state = triple_forward(g, state, store, config)
    return graph_readout(state, store, config)
