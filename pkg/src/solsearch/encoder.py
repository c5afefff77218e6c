"""Code and query encoders producing comparable embedding vectors.

The code side fuses four channels: body tokens, name words, API words
(each through its own attention block) and the dependency graph (through
the graph encoder). The four channel vectors form a 4-step sequence fed
to an LSTM whose final hidden state is projected to the output width.
The query side runs its own attention block over normalized words, or
delegates to an external embedding provider speaking a line-delimited
JSON protocol on its standard streams.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass

import numpy as np

from .cedg import Cedg, EDGE_TYPES, NODE_CATEGORIES, SOL_TYPES
from .frontend import TokenBundle, Vocabulary, normalize_words
from .graph_encoder import encode_graph, graph_param_names
from .nn.layers import (
    FFN_WIDTH_FACTOR,
    LSTM_GATES,
    block_param_names,
    dense,
    lstm_param_names,
    lstm_sequence,
    positional_encoding,
    transformer_block,
)
from .nn.params import ModelConfig, ParameterStore
from .nn.tensor import Tensor, concat, constant, rows

__all__ = [
    "CodeEmbedding",
    "QueryEmbedding",
    "ExternalEmbeddingProvider",
    "build_parameters",
    "encode_code",
    "encode_code_tensor",
    "encode_query",
    "encode_query_tensor",
]

TEXT_CHANNELS = (("T", "tok"), ("F", "name"), ("A", "api"))


@dataclass(frozen=True)
class CodeEmbedding:
    id: str
    vector: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.vector).all():
            raise ValueError(f"non-finite code embedding for {self.id!r}")
        if not np.any(self.vector):
            raise ValueError(f"zero code embedding for {self.id!r}")


@dataclass(frozen=True)
class QueryEmbedding:
    vector: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.vector).all():
            raise ValueError("non-finite query embedding")
        if not np.any(self.vector):
            raise ValueError("zero query embedding")


def build_parameters(config: ModelConfig, vocab: Vocabulary,
                     seed: int = 0) -> ParameterStore:
    """Create every model parameter in a fixed, seed-reproducible order."""
    store = ParameterStore(seed=seed)
    d = config.embed_dim
    dk = config.head_dim
    out = config.out_dim
    vocab_size = len(vocab)

    store.create("code/word", (vocab_size, d), fan_in=d)
    store.create("query/word", (vocab_size, d), fan_in=d)

    for prefix in ("tok", "name", "api", "query"):
        for j in range(config.text_heads):
            for w in ("wq", "wk", "wv"):
                store.create(f"{prefix}/h{j}/{w}", (d, dk), fan_in=d)
        store.create(f"{prefix}/norm1/gain", (1, d), init="ones")
        store.create(f"{prefix}/norm1/bias", (1, d), init="zeros")
        store.create(f"{prefix}/ffn/w1", (d, FFN_WIDTH_FACTOR * d), fan_in=d)
        store.create(f"{prefix}/ffn/b1", (1, FFN_WIDTH_FACTOR * d), init="zeros")
        store.create(f"{prefix}/ffn/w2", (FFN_WIDTH_FACTOR * d, d), fan_in=FFN_WIDTH_FACTOR * d)
        store.create(f"{prefix}/ffn/b2", (1, d), init="zeros")
        store.create(f"{prefix}/norm2/gain", (1, d), init="ones")
        store.create(f"{prefix}/norm2/bias", (1, d), init="zeros")

    store.create("query/proj/w", (d, out), fan_in=d)
    store.create("query/proj/b", (1, out), init="zeros")

    store.create("graph/cat", (len(NODE_CATEGORIES), d), fan_in=d)
    store.create("graph/soltype", (len(SOL_TYPES), d), fan_in=d)
    store.create("graph/fallback_name", (1, d), fan_in=d)
    store.create("graph/etype", (len(EDGE_TYPES), d), fan_in=d)
    for m in range(config.graph_heads):
        store.create(f"graph/h{m}/w1", (3 * d, d), fan_in=3 * d)
        store.create(f"graph/h{m}/w2", (d, 1), fan_in=d)
    store.create("graph/node_proj/w", (3 * d, d), fan_in=3 * d)
    store.create("graph/node_proj/b", (1, d), init="zeros")
    store.create("graph/readout/w", (config.max_graph_nodes * d, d),
                 fan_in=config.max_graph_nodes * d)
    store.create("graph/readout/b", (1, d), init="zeros")

    for gate in LSTM_GATES:
        store.create(f"fusion/{gate}/wx", (d, out), fan_in=d)
        store.create(f"fusion/{gate}/wh", (out, out), fan_in=out)
        store.create(f"fusion/{gate}/b", (1, out), init="zeros")
    store.create("out/w", (out, out), fan_in=out)
    store.create("out/b", (1, out), init="zeros")
    return store


def _encode_words(words, table_name: str, prefix: str, vocab: Vocabulary,
                  store: ParameterStore, config: ModelConfig) -> Tensor | None:
    """Embed + position-code a word sequence and run its attention block.

    Word vectors are scaled by sqrt(width) so the position codes (unit
    amplitude) do not drown the lexical signal.
    """
    ids = vocab.encode(words)
    if not ids:
        return None
    pe = positional_encoding(len(ids), config.embed_dim)
    scale = float(np.sqrt(config.embed_dim))
    x = rows(store[table_name], ids) * scale + constant(pe)
    vec, _ = transformer_block(x, store, prefix, config.text_heads)
    return vec


def encode_code_tensor(bundle: TokenBundle, graph: Cedg, store: ParameterStore,
                       config: ModelConfig, vocab: Vocabulary) -> Tensor:
    """Differentiable code embedding, shape (1, out_dim).

    Channels outside ``config.modalities`` (and empty channels) contribute
    zero steps, so the result depends only on the enabled inputs.
    """
    d = config.embed_dim
    zero = constant(np.zeros((1, d)))
    steps: list[Tensor] = []
    produced_any = False
    sequences = {
        "T": bundle.tokens,
        "F": bundle.name_words,
        "A": bundle.api_words,
    }
    for key, prefix in TEXT_CHANNELS:
        vec = None
        if key in config.modalities:
            vec = _encode_words(sequences[key], "code/word", prefix, vocab, store, config)
        steps.append(vec if vec is not None else zero)
        produced_any = produced_any or vec is not None
    if "G" in config.modalities and graph.nodes:
        steps.append(encode_graph(graph, vocab, store, config))
        produced_any = True
    else:
        steps.append(zero)
    if not produced_any:
        raise ValueError("empty code unit: no enabled channel has content")
    fused = concat(steps, axis=0)  # (4, embed_dim)
    hidden = lstm_sequence(fused, store, "fusion", config.out_dim)
    return dense(hidden, store, "out")


def encode_code(unit_id: str, bundle: TokenBundle, graph: Cedg,
                store: ParameterStore, config: ModelConfig,
                vocab: Vocabulary) -> CodeEmbedding:
    vec = encode_code_tensor(bundle, graph, store, config, vocab)
    return CodeEmbedding(id=unit_id, vector=vec.data[0].copy())


def encode_query_tensor(text: str, store: ParameterStore, config: ModelConfig,
                        vocab: Vocabulary) -> Tensor:
    """Differentiable query/docstring embedding, shape (1, out_dim)."""
    words = normalize_words(text)[: config.max_tokens]
    if not words:
        raise ValueError("empty query text")
    vec = _encode_words(words, "query/word", "query", vocab, store, config)
    return dense(vec, store, "query/proj")


def encode_query(text: str, store: ParameterStore, config: ModelConfig,
                 vocab: Vocabulary,
                 provider: "ExternalEmbeddingProvider | None" = None) -> QueryEmbedding:
    if provider is not None:
        vector = provider.embed(text)
        if vector.shape != (config.out_dim,):
            raise ValueError(
                f"provider returned width {vector.shape[-1] if vector.ndim else 0}, "
                f"expected {config.out_dim}"
            )
        return QueryEmbedding(vector=vector)
    vec = encode_query_tensor(text, store, config, vocab)
    return QueryEmbedding(vector=vec.data[0].copy())


class ExternalEmbeddingProvider:
    """Adapter to an external embedding process.

    The provider command is spawned once; each request is one JSON line
    ``{"text": ...}`` on its stdin and each response one JSON line
    ``{"vector": [...]}`` on its stdout.
    """

    def __init__(self, command: str):
        self.command = command
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
            )
        return self._proc

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise ValueError("empty query text")
        proc = self._ensure()
        assert proc.stdin is not None and proc.stdout is not None
        proc.stdin.write(json.dumps({"text": text}) + "\n")
        proc.stdin.flush()
        line = proc.stdout.readline()
        if not line:
            raise RuntimeError(f"embedding provider {self.command!r} closed its output")
        try:
            payload = json.loads(line)
            vector = np.asarray(payload["vector"], dtype=np.float64)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise RuntimeError(f"bad provider response: {line!r}") from exc
        return vector

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)
        self._proc = None

    def __enter__(self) -> "ExternalEmbeddingProvider":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
