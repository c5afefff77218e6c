"""Layer primitives: position codes, attention, feed-forward, LSTM, losses.

Sequences are (length, width) tensors; vectors are kept as (1, width) so
every op stays two-dimensional. Parameters live in a
:class:`~solsearch.nn.params.ParameterStore` under slash-separated names;
each layer documents the names it consumes.
"""

from __future__ import annotations

import numpy as np

from .params import ParameterStore
from .tensor import (
    Tensor,
    concat,
    constant,
    div,
    masked_softmax,
    matmul,
    mul,
    relu,
    rows,
    sigmoid,
    sqrt,
    sum_,
    tanh,
    transpose,
)

__all__ = [
    "positional_encoding",
    "scaled_attention",
    "multi_head_attention",
    "layer_norm",
    "transformer_block",
    "mean_pool",
    "lstm_sequence",
    "dense",
    "cosine_t",
    "cosine",
    "ranking_loss",
    "attention_param_names",
    "block_param_names",
    "lstm_param_names",
]

FFN_WIDTH_FACTOR = 4  # inner feed-forward width relative to the model width

LSTM_GATES = ("i", "f", "g", "o")


def positional_encoding(max_pos: int, dim: int) -> np.ndarray:
    """Sinusoidal position codes, shape (max_pos, dim).

    Even columns carry sin(pos / 10000^(2i/dim)), odd columns the matching
    cos. ``dim`` must be even.
    """
    if dim % 2 != 0:
        raise ValueError(f"positional encoding needs an even width, got {dim}")
    if max_pos < 1:
        raise ValueError(f"max_pos must be >= 1, got {max_pos}")
    pos = np.arange(max_pos, dtype=np.float64)[:, None]
    i2 = np.arange(0, dim, 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, i2 / dim)
    pe = np.empty((max_pos, dim), dtype=np.float64)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe


def scaled_attention(q: Tensor, k: Tensor, v: Tensor,
                     mask: np.ndarray | None = None) -> Tensor:
    """softmax(q kᵀ / sqrt(width)) v with optional key mask.

    ``mask`` is boolean over key positions; masked keys receive exactly
    zero weight.
    """
    width = q.shape[-1]
    scores = mul(matmul(q, transpose(k)), 1.0 / np.sqrt(width))
    weights = masked_softmax(scores, mask)
    return matmul(weights, v)


def attention_param_names(prefix: str, heads: int) -> list[str]:
    return [
        f"{prefix}/h{j}/{w}" for j in range(heads) for w in ("wq", "wk", "wv")
    ]


def multi_head_attention(x: Tensor, store: ParameterStore, prefix: str,
                         heads: int, mask: np.ndarray | None = None) -> Tensor:
    """Concatenation of per-head scaled attention over projected inputs.

    Consumes ``{prefix}/h{j}/wq|wk|wv`` for each head j; output width is
    heads * head_width.
    """
    store.require(attention_param_names(prefix, heads))
    outputs = []
    for j in range(heads):
        q = matmul(x, store[f"{prefix}/h{j}/wq"])
        k = matmul(x, store[f"{prefix}/h{j}/wk"])
        v = matmul(x, store[f"{prefix}/h{j}/wv"])
        outputs.append(scaled_attention(q, k, v, mask))
    return outputs[0] if heads == 1 else concat(outputs, axis=1)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row to zero mean / unit variance, then rescale."""
    width = x.shape[-1]
    mu = mul(sum_(x, axis=-1, keepdims=True), 1.0 / width)
    centered = x - mu
    var = mul(sum_(mul(centered, centered), axis=-1, keepdims=True), 1.0 / width)
    return div(centered, sqrt(var + eps)) * gain + bias


def mean_pool(seq: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Mean over unmasked rows, kept as a (1, width) vector."""
    n = seq.shape[0]
    if mask is None:
        weights = np.full((1, n), 1.0 / n)
    else:
        mask = np.asarray(mask, dtype=bool)
        count = int(mask.sum())
        if count == 0:
            raise ValueError("mean_pool: every position is masked")
        weights = np.where(mask, 1.0 / count, 0.0)[None, :]
    return matmul(constant(weights), seq)


def block_param_names(prefix: str, heads: int) -> list[str]:
    return attention_param_names(prefix, heads) + [
        f"{prefix}/norm1/gain", f"{prefix}/norm1/bias",
        f"{prefix}/ffn/w1", f"{prefix}/ffn/b1",
        f"{prefix}/ffn/w2", f"{prefix}/ffn/b2",
        f"{prefix}/norm2/gain", f"{prefix}/norm2/bias",
    ]


def transformer_block(x: Tensor, store: ParameterStore, prefix: str, heads: int,
                      mask: np.ndarray | None = None) -> tuple[Tensor, Tensor]:
    """Attention + Add&Norm + feed-forward + Add&Norm, then mean pooling.

    Returns ``(vector, sequence)``: the (1, width) pooled reading and the
    full per-position output.
    """
    store.require(block_param_names(prefix, heads))
    att = multi_head_attention(x, store, prefix, heads, mask)
    h = layer_norm(x + att, store[f"{prefix}/norm1/gain"], store[f"{prefix}/norm1/bias"])
    inner = relu(matmul(h, store[f"{prefix}/ffn/w1"]) + store[f"{prefix}/ffn/b1"])
    ff = matmul(inner, store[f"{prefix}/ffn/w2"]) + store[f"{prefix}/ffn/b2"]
    out = layer_norm(h + ff, store[f"{prefix}/norm2/gain"], store[f"{prefix}/norm2/bias"])
    return mean_pool(out, mask), out


def lstm_param_names(prefix: str) -> list[str]:
    return [
        f"{prefix}/{gate}/{w}" for gate in LSTM_GATES for w in ("wx", "wh", "b")
    ]


def lstm_sequence(xs: Tensor, store: ParameterStore, prefix: str,
                  hidden_dim: int) -> Tensor:
    """Run an LSTM over the rows of ``xs``; returns the final hidden state.

    Consumes ``{prefix}/{i,f,g,o}/wx|wh|b``. The state starts at zero.
    """
    store.require(lstm_param_names(prefix))
    steps = xs.shape[0]
    if steps < 1:
        raise ValueError("lstm_sequence needs at least one step")
    h = constant(np.zeros((1, hidden_dim)))
    c = constant(np.zeros((1, hidden_dim)))
    for t in range(steps):
        x_t = rows(xs, np.array([t]))
        gates = {}
        for gate in LSTM_GATES:
            pre = (
                matmul(x_t, store[f"{prefix}/{gate}/wx"])
                + matmul(h, store[f"{prefix}/{gate}/wh"])
                + store[f"{prefix}/{gate}/b"]
            )
            gates[gate] = tanh(pre) if gate == "g" else sigmoid(pre)
        c = gates["f"] * c + gates["i"] * gates["g"]
        h = gates["o"] * tanh(c)
    return h


def dense(x: Tensor, store: ParameterStore, prefix: str) -> Tensor:
    return matmul(x, store[f"{prefix}/w"]) + store[f"{prefix}/b"]


def _norm(v: Tensor) -> Tensor:
    return sqrt(sum_(mul(v, v)))


def cosine_t(a: Tensor, b: Tensor) -> Tensor:
    """Differentiable cosine similarity of two (1, width) vectors."""
    if not np.any(a.data) or not np.any(b.data):
        raise ValueError("cosine undefined for a zero vector")
    return sum_(mul(a, b)) / (_norm(a) * _norm(b))


def cosine(a, b) -> float:
    """Cosine similarity of two plain vectors, clamped into [-1, 1]."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def ranking_loss(code_vec: Tensor, pos_vec: Tensor, neg_vec: Tensor,
                 margin: float) -> Tensor:
    """max(0, margin + cos(code, neg) - cos(code, pos)) as a scalar tensor."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    gap = cosine_t(code_vec, neg_vec) - cosine_t(code_vec, pos_vec)
    return relu(gap + margin)
