"""Joint training of the code and query encoders with a ranking margin.

Each step embeds a code unit, its own docstring, and one randomly drawn
foreign docstring, then minimizes
``max(0, margin + cos(code, foreign) - cos(code, own))``. Negatives are
resampled every step; batches accumulate their mean loss into a single
backward pass followed by one Adam update. Everything is driven by one
seeded generator, so a fixed seed reproduces checkpoints bit for bit.
"""

from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cedg import Cedg, build_cedg
from .encoder import build_parameters, encode_code_tensor, encode_query_tensor
from .frontend import FunctionUnit, TokenBundle, TokenCaps, Vocabulary, normalize_words, tokenize_code
from .nn.layers import ranking_loss
from .nn.optim import Adam
from .nn.params import ModelConfig, ParameterStore
from .nn.tensor import backward

__all__ = [
    "TrainingPair",
    "TrainConfig",
    "prepare_pairs",
    "sample_negative",
    "train",
    "kfold_split",
]


@dataclass(frozen=True)
class TrainingPair:
    unit_id: str
    bundle: TokenBundle
    graph: Cedg
    docstring: str

    def __post_init__(self):
        if not self.docstring.strip():
            raise ValueError(f"pair {self.unit_id!r} has an empty docstring")


@dataclass(frozen=True)
class TrainConfig:
    margin: float = 0.05
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 42
    folds: int = 10

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.folds < 2:
            raise ValueError("cross-validation needs folds >= 2")


def prepare_pairs(units: Sequence[FunctionUnit],
                  caps: TokenCaps = TokenCaps()) -> list[TrainingPair]:
    """Tokenize and graph every documented unit; undocumented ones drop out.

    Units sharing a source path form each other's contract context.
    """
    by_path: dict[str, list[FunctionUnit]] = defaultdict(list)
    for unit in units:
        by_path[unit.path].append(unit)
    pairs = []
    for unit in units:
        if not unit.docstring or not normalize_words(unit.docstring):
            continue
        pairs.append(
            TrainingPair(
                unit_id=unit.id,
                bundle=tokenize_code(unit, caps),
                graph=build_cedg(unit, by_path[unit.path]),
                docstring=unit.docstring,
            )
        )
    return pairs


def sample_negative(pairs: Sequence[TrainingPair], positive_index: int,
                    rng: np.random.Generator) -> str:
    """Docstring of a uniformly drawn pair other than ``positive_index``."""
    if len(pairs) < 2:
        raise ValueError("negative sampling needs at least 2 pairs")
    draw = int(rng.integers(0, len(pairs) - 1))
    if draw >= positive_index:
        draw += 1
    return pairs[draw].docstring


@dataclass
class TrainLog:
    epoch_losses: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)

    def rows(self):
        for epoch, (loss, secs) in enumerate(
            zip(self.epoch_losses, self.epoch_seconds), 1
        ):
            yield epoch, loss, secs


def train(pairs: Sequence[TrainingPair], config: TrainConfig,
          model_config: ModelConfig, vocab: Vocabulary,
          store: ParameterStore | None = None) -> tuple[ParameterStore, TrainLog]:
    """Fit the parameters on (code, docstring) pairs.

    Returns the trained store and the per-epoch loss log. Deterministic for
    a fixed config seed. Raises on a non-finite loss, naming the pair.
    """
    if len(pairs) < 2:
        raise ValueError("training needs at least 2 pairs")
    rng = np.random.default_rng(config.seed)
    if store is None:
        store = build_parameters(model_config, vocab, seed=config.seed)
    optimizer = Adam(lr=config.lr)
    log = TrainLog()

    for _ in range(config.epochs):
        started = time.perf_counter()
        order = rng.permutation(len(pairs))
        losses: list[float] = []
        for chunk_start in range(0, len(order), config.batch_size):
            batch = order[chunk_start : chunk_start + config.batch_size]
            store.zero_grads()
            total = None
            for idx in batch:
                pair = pairs[int(idx)]
                code_vec = encode_code_tensor(
                    pair.bundle, pair.graph, store, model_config, vocab
                )
                pos_vec = encode_query_tensor(
                    pair.docstring, store, model_config, vocab
                )
                neg_doc = sample_negative(pairs, int(idx), rng)
                neg_vec = encode_query_tensor(neg_doc, store, model_config, vocab)
                loss = ranking_loss(code_vec, pos_vec, neg_vec, config.margin)
                if not np.isfinite(loss.data).all():
                    raise RuntimeError(
                        f"non-finite loss for pair {pair.unit_id!r}; aborting"
                    )
                losses.append(loss.item())
                total = loss if total is None else total + loss
            backward(total * (1.0 / len(batch)))
            optimizer.step(store, store.grads())
        log.epoch_losses.append(float(np.mean(losses)))
        log.epoch_seconds.append(time.perf_counter() - started)
    return store, log


def kfold_split(pairs: Sequence[TrainingPair], folds: int,
                seed: int) -> list[tuple[list[str], list[str]]]:
    """Disjoint, exhaustive (train ids, test ids) splits, sizes within 1."""
    if folds < 1:
        raise ValueError("folds must be >= 1")
    if folds > len(pairs):
        raise ValueError(f"cannot split {len(pairs)} pairs into {folds} folds")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))
    chunks = np.array_split(order, folds)
    splits = []
    for chunk in chunks:
        test = set(int(i) for i in chunk)
        test_ids = [pairs[i].unit_id for i in sorted(test)]
        train_ids = [
            pairs[i].unit_id for i in range(len(pairs)) if i not in test
        ]
        splits.append((train_ids, test_ids))
    return splits
