"""Numeric kernel: float64 autodiff tensors, layers, optimizer, checkpoints."""

from .tensor import (
    Tensor,
    backward,
    concat,
    constant,
    elu,
    leaky_relu,
    masked_softmax,
    matmul,
    relu,
    reshape,
    rows,
    tensor,
    transpose,
)
from .layers import (
    cosine,
    cosine_t,
    dense,
    layer_norm,
    lstm_sequence,
    mean_pool,
    multi_head_attention,
    positional_encoding,
    ranking_loss,
    scaled_attention,
    transformer_block,
)
from .params import (
    CheckpointError,
    ModelConfig,
    ParameterStore,
    load_checkpoint,
    save_checkpoint,
)
from .optim import Adam
from .gradcheck import check_gradients, max_relative_error, numeric_gradient

__all__ = [
    "Tensor",
    "tensor",
    "constant",
    "backward",
    "concat",
    "rows",
    "reshape",
    "transpose",
    "matmul",
    "relu",
    "leaky_relu",
    "elu",
    "masked_softmax",
    "positional_encoding",
    "scaled_attention",
    "multi_head_attention",
    "transformer_block",
    "layer_norm",
    "mean_pool",
    "lstm_sequence",
    "dense",
    "cosine",
    "cosine_t",
    "ranking_loss",
    "ModelConfig",
    "ParameterStore",
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
    "Adam",
    "check_gradients",
    "max_relative_error",
    "numeric_gradient",
]
