"""Semantic code search for Solidity smart contracts.

Pipeline: extract function units from source, tokenize them into textual
channels, build a dependency graph per unit, embed everything with
attention encoders trained against docstrings, and answer natural-language
queries by cosine nearest neighbors over a vector index.
"""

from .frontend import (
    FunctionUnit,
    TokenBundle,
    TokenCaps,
    Vocabulary,
    build_vocabulary,
    deduplicate,
    extract_functions,
    tokenize_code,
)
from .cedg import Cedg, CedgEdge, CedgNode, build_cedg, validate
from .encoder import CodeEmbedding, QueryEmbedding, encode_code, encode_query
from .index import SearchIndex
from .metrics import evaluate, mrr, success_rate_at_k, wilcoxon_signed_rank
from .nn.params import ModelConfig, ParameterStore, load_checkpoint, save_checkpoint
from .synth import generate_synthetic_corpus
from .trainer import TrainConfig, TrainingPair, kfold_split, prepare_pairs, train

__version__ = "0.1.0"

__all__ = [
    "FunctionUnit",
    "TokenBundle",
    "TokenCaps",
    "Vocabulary",
    "build_vocabulary",
    "deduplicate",
    "extract_functions",
    "tokenize_code",
    "Cedg",
    "CedgEdge",
    "CedgNode",
    "build_cedg",
    "validate",
    "CodeEmbedding",
    "QueryEmbedding",
    "encode_code",
    "encode_query",
    "SearchIndex",
    "evaluate",
    "mrr",
    "success_rate_at_k",
    "wilcoxon_signed_rank",
    "ModelConfig",
    "ParameterStore",
    "load_checkpoint",
    "save_checkpoint",
    "generate_synthetic_corpus",
    "TrainConfig",
    "TrainingPair",
    "kfold_split",
    "prepare_pairs",
    "train",
    "__version__",
]
