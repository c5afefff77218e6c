"""Retrieval metrics, the paired signed-rank test, and fold evaluation."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .encoder import encode_code_tensor, encode_query_tensor
from .frontend import Vocabulary
from .index import SearchIndex
from .nn.params import ModelConfig, ParameterStore
from .trainer import TrainingPair, kfold_split

__all__ = [
    "success_rate_at_k",
    "mrr",
    "WilcoxonResult",
    "wilcoxon_signed_rank",
    "FoldResult",
    "EvalResult",
    "evaluate_pairs",
    "evaluate",
    "rank_of",
]

Rank = "int | None"


def _check_ranks(ranks: Sequence, k: int) -> None:
    if len(ranks) == 0:
        raise ValueError("metrics need at least one query")
    if k < 1:
        raise ValueError("k must be >= 1")


def success_rate_at_k(ranks: Sequence[int | None], k: int) -> float:
    """Fraction of queries whose first hit lands within the top k."""
    _check_ranks(ranks, k)
    hits = sum(1 for r in ranks if r is not None and r <= k)
    return hits / len(ranks)


def mrr(ranks: Sequence[int | None], cutoff: int = 10) -> float:
    """Mean reciprocal rank; ranks beyond the cutoff (or misses) count 0."""
    _check_ranks(ranks, cutoff)
    total = sum(1.0 / r for r in ranks if r is not None and r <= cutoff)
    return total / len(ranks)


def rank_of(results: Sequence[tuple[str, float]], target_id: str) -> int | None:
    """1-based position of ``target_id`` in a ranked result list."""
    for position, (result_id, _) in enumerate(results, 1):
        if result_id == target_id:
            return position
    return None


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # min of the positive- and negative-rank sums
    p_value: float | None
    n: int  # non-zero paired differences
    method: str  # exact | normal | degenerate | insufficient-data

    @property
    def significant_at_5pct(self) -> bool:
        return self.p_value is not None and self.p_value < 0.05


def _exact_p(ranks: np.ndarray, observed: float) -> float:
    # distribution of the rank sum over all sign assignments, by convolution
    total = int(ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in ranks.astype(int):
        if r > 0:
            counts[r:] += counts[:-r]
    cdf = np.cumsum(counts)
    tail = cdf[int(observed)] / counts.sum()
    return min(1.0, 2.0 * tail)


def wilcoxon_signed_rank(sample_a: Sequence[float],
                         sample_b: Sequence[float]) -> WilcoxonResult:
    """Two-sided paired signed-rank test.

    Zero differences are dropped. With no remaining differences the result
    is degenerate (p = 1.0); with fewer than 6 it is flagged as
    insufficient data (no p-value). Tied |differences| or n > 25 switch to
    the normal approximation with tie correction; otherwise the exact
    distribution is enumerated.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("samples must be paired (equal length)")
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n == 0:
        return WilcoxonResult(statistic=0.0, p_value=1.0, n=0, method="degenerate")

    magnitudes = np.abs(diffs)
    order = np.argsort(magnitudes, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    # average ranks across ties
    sorted_mag = magnitudes[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_mag[j + 1] == sorted_mag[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0  # 1-based average
        i = j + 1

    w_plus = float(ranks[diffs > 0].sum())
    w_minus = float(ranks[diffs < 0].sum())
    statistic = min(w_plus, w_minus)

    if n < 6:
        return WilcoxonResult(statistic, None, n, "insufficient-data")

    has_ties = np.unique(magnitudes).size != n
    if n <= 25 and not has_ties:
        p = _exact_p(ranks, statistic)
        return WilcoxonResult(statistic, p, n, "exact")

    mean = n * (n + 1) / 4.0
    variance = n * (n + 1) * (2 * n + 1) / 24.0
    # tie correction
    _, tie_counts = np.unique(magnitudes, return_counts=True)
    variance -= float(((tie_counts**3 - tie_counts) / 48.0).sum())
    if variance <= 0:
        return WilcoxonResult(statistic, 1.0, n, "degenerate")
    z = (statistic - mean) / math.sqrt(variance)
    p = min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))
    return WilcoxonResult(statistic, p, n, "normal")


# ---------------------------------------------------------------------------
# fold evaluation


@dataclass(frozen=True)
class FoldResult:
    sr: dict[int, float]
    mrr: float
    n: int
    ranks: tuple[int | None, ...]


@dataclass
class EvalResult:
    folds: list[FoldResult]
    ks: tuple[int, ...]
    mrr_cutoff: int
    embed_ms: float = 0.0
    retrieve_ms: float = 0.0
    skipped_folds: int = 0

    @property
    def mean_sr(self) -> dict[int, float]:
        return {
            k: float(np.mean([f.sr[k] for f in self.folds])) for k in self.ks
        }

    @property
    def mean_mrr(self) -> float:
        return float(np.mean([f.mrr for f in self.folds]))

    def to_dict(self, include_latency: bool = True) -> dict:
        doc = {
            "folds": [
                {
                    "sr": {str(k): f.sr[k] for k in self.ks},
                    "mrr": f.mrr,
                    "n": f.n,
                }
                for f in self.folds
            ],
            "mean": {
                "sr": {str(k): self.mean_sr[k] for k in self.ks},
                "mrr": self.mean_mrr,
            },
        }
        if include_latency:
            doc["latency_ms"] = {
                "embed": self.embed_ms,
                "retrieve": self.retrieve_ms,
            }
        return doc

    def to_json(self, include_latency: bool = True) -> str:
        return json.dumps(self.to_dict(include_latency), sort_keys=True)


def evaluate_pairs(
    pairs: Sequence[TrainingPair],
    code_encoder: Callable[[TrainingPair], np.ndarray],
    query_encoder: Callable[[str], np.ndarray],
    folds: int = 10,
    ks: Sequence[int] = (1, 5, 10),
    mrr_cutoff: int = 10,
    seed: int = 42,
) -> EvalResult:
    """Retrieval evaluation over folds with pluggable encoders.

    Per fold: index the fold's code vectors, issue every docstring as a
    query, and record the rank of its own unit. ``folds=1`` evaluates the
    whole set in place (training-set retrieval); folds with fewer than two
    pairs are skipped with a counter.
    """
    if folds == 1:
        splits = [([], [p.unit_id for p in pairs])]
    else:
        splits = kfold_split(pairs, folds, seed)
    by_id = {p.unit_id: p for p in pairs}
    result = EvalResult(folds=[], ks=tuple(ks), mrr_cutoff=mrr_cutoff)
    embed_times: list[float] = []
    retrieve_times: list[float] = []
    dim: int | None = None
    for _, test_ids in splits:
        fold_pairs = [by_id[i] for i in test_ids]
        if len(fold_pairs) < 2:
            result.skipped_folds += 1
            continue
        vectors = {}
        for pair in fold_pairs:
            started = time.perf_counter()
            vectors[pair.unit_id] = code_encoder(pair)
            embed_times.append(time.perf_counter() - started)
        if dim is None:
            dim = len(next(iter(vectors.values())))
        fold_index = SearchIndex(dim)
        for pair in fold_pairs:
            fold_index.add(pair.unit_id, vectors[pair.unit_id])
        ranks: list[int | None] = []
        for pair in fold_pairs:
            started = time.perf_counter()
            query_vec = query_encoder(pair.docstring)
            embed_times.append(time.perf_counter() - started)
            started = time.perf_counter()
            results = fold_index.search(query_vec, k=len(fold_index))
            retrieve_times.append(time.perf_counter() - started)
            ranks.append(rank_of(results, pair.unit_id))
        result.folds.append(
            FoldResult(
                sr={k: success_rate_at_k(ranks, k) for k in ks},
                mrr=mrr(ranks, mrr_cutoff),
                n=len(fold_pairs),
                ranks=tuple(ranks),
            )
        )
    if not result.folds:
        raise ValueError("no evaluable folds (all skipped)")
    result.embed_ms = float(np.mean(embed_times) * 1000.0)
    result.retrieve_ms = float(np.mean(retrieve_times) * 1000.0)
    return result


def evaluate(
    store: ParameterStore,
    config: ModelConfig,
    vocab: Vocabulary,
    pairs: Sequence[TrainingPair],
    folds: int = 10,
    ks: Sequence[int] = (1, 5, 10),
    mrr_cutoff: int = 10,
    seed: int = 42,
) -> EvalResult:
    """Evaluation with the real encoders behind a trained checkpoint."""

    def code_encoder(pair: TrainingPair) -> np.ndarray:
        return encode_code_tensor(pair.bundle, pair.graph, store, config, vocab).data[0]

    def query_encoder(text: str) -> np.ndarray:
        return encode_query_tensor(text, store, config, vocab).data[0]

    return evaluate_pairs(
        pairs, code_encoder, query_encoder,
        folds=folds, ks=ks, mrr_cutoff=mrr_cutoff, seed=seed,
    )
