"""Command-line interface: ingest, graph, train, index, search, eval, synth."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from .cedg import build_cedg, serialize, to_dot
from .encoder import (
    ExternalEmbeddingProvider,
    encode_code_tensor,
    encode_query,
)
from .frontend import (
    build_vocabulary,
    deduplicate,
    extract_functions,
    read_corpus,
    tokenize_code,
    write_corpus,
)
from .index import SearchIndex
from .metrics import evaluate
from .nn.params import ModelConfig, load_checkpoint, save_checkpoint
from .synth import write_synthetic_corpus
from .trainer import TrainConfig, kfold_split, prepare_pairs, train


def _cmd_ingest(args: argparse.Namespace) -> int:
    src = Path(args.src)
    units = []
    failures = 0
    for sol_file in sorted(src.rglob("*.sol")):
        try:
            text = sol_file.read_text(encoding="utf-8", errors="replace")
            units.extend(extract_functions(text, str(sol_file.relative_to(src))))
        except ValueError as exc:
            failures += 1
            print(f"skipping {sol_file}: {exc}", file=sys.stderr)
    if args.dedup:
        units = deduplicate(units)
    count = write_corpus(units, args.out)
    print(f"wrote {count} units to {args.out}" + (f" ({failures} files skipped)" if failures else ""))
    return 0


def _cmd_graph(args: argparse.Namespace) -> int:
    units = read_corpus(args.corpus)
    by_id = {u.id: u for u in units}
    if args.id not in by_id:
        print(f"unknown unit id {args.id!r}", file=sys.stderr)
        return 1
    unit = by_id[args.id]
    context = [u for u in units if u.path == unit.path]
    graph = build_cedg(unit, context)
    print(to_dot(graph) if args.dot else serialize(graph))
    return 0


def _pairs_and_vocab(corpus_path: str, config: ModelConfig):
    units = read_corpus(corpus_path)
    from .frontend import TokenCaps

    caps = TokenCaps(config.max_tokens, config.max_name_words, config.max_api_words)
    pairs = prepare_pairs(units, caps)
    vocab_items = [p.bundle for p in pairs] + [p.docstring for p in pairs]
    vocab = build_vocabulary(vocab_items, min_count=2)
    return units, pairs, vocab


def _cmd_train(args: argparse.Namespace) -> int:
    modalities = tuple(args.modalities.split(",")) if args.modalities else ("T", "F", "A", "G")
    config = ModelConfig(
        embed_dim=args.dim,
        out_dim=args.out_dim,
        text_heads=args.heads,
        graph_heads=args.graph_heads,
        margin=args.margin,
        modalities=modalities,
    )
    _, pairs, vocab = _pairs_and_vocab(args.corpus, config)
    if len(pairs) < 2:
        print("corpus has fewer than 2 documented units", file=sys.stderr)
        return 1
    tc = TrainConfig(
        margin=args.margin, epochs=args.epochs, batch_size=args.batch,
        lr=args.lr, seed=args.seed,
        folds=args.folds if args.folds else 10,
    )
    if args.folds:
        splits = kfold_split(pairs, args.folds, args.seed)
        by_id = {p.unit_id: p for p in pairs}
        fold_mrrs = []
        for fold_no, (train_ids, test_ids) in enumerate(splits, 1):
            fold_store, _ = train([by_id[i] for i in train_ids], tc, config, vocab)
            result = evaluate(
                fold_store, config, vocab, [by_id[i] for i in test_ids],
                folds=1, seed=args.seed,
            )
            fold_mrrs.append(result.mean_mrr)
            print(f"fold {fold_no}: test MRR={result.mean_mrr:.4f}")
        print(f"cross-validation mean MRR: {float(np.mean(fold_mrrs)):.4f}")
    store, log = train(pairs, tc, config, vocab)
    save_checkpoint(args.out, store, config, vocab)
    log_path = Path(str(args.out) + ".train.csv")
    with open(log_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_loss", "elapsed_seconds"])
        for epoch, loss, secs in log.rows():
            writer.writerow([epoch, f"{loss:.6f}", f"{secs:.3f}"])
    print(f"saved checkpoint to {args.out} (loss log: {log_path})")
    return 0


def _cmd_index(args: argparse.Namespace) -> int:
    store, config, vocab = load_checkpoint(args.model)
    units = read_corpus(args.corpus)
    from .frontend import TokenCaps

    caps = TokenCaps(config.max_tokens, config.max_name_words, config.max_api_words)
    by_path = defaultdict(list)
    for unit in units:
        by_path[unit.path].append(unit)
    search_index = SearchIndex(config.out_dim)
    for unit in units:
        bundle = tokenize_code(unit, caps)
        graph = build_cedg(unit, by_path[unit.path])
        vector = encode_code_tensor(bundle, graph, store, config, vocab).data[0]
        search_index.add(
            unit.id, vector,
            metadata={
                "name": unit.name, "kind": unit.kind, "path": unit.path,
                "span": list(unit.span), "docstring": unit.docstring,
                "code": unit.source,
            },
        )
    search_index.persist(args.out)
    print(f"indexed {len(search_index)} units into {args.out}")
    return 0


def _cmd_search(args: argparse.Namespace) -> int:
    store, config, vocab = load_checkpoint(args.model)
    search_index = SearchIndex.load(args.index)
    provider = ExternalEmbeddingProvider(args.provider) if args.provider else None
    try:
        embedding = encode_query(args.query, store, config, vocab, provider=provider)
    finally:
        if provider is not None:
            provider.close()
    results = search_index.search(embedding.vector, k=args.k)
    for position, (record_id, score) in enumerate(results, 1):
        meta = search_index.metadata.get(record_id, {})
        label = meta.get("name") or record_id
        location = f"{meta.get('path', '?')}:{meta.get('span', ['?'])[0]}"
        print(f"{position:2d}. {score:+.4f}  {label}  ({location})  [{record_id}]")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    store, config, vocab = load_checkpoint(args.model)
    units = read_corpus(args.corpus)
    from .frontend import TokenCaps

    caps = TokenCaps(config.max_tokens, config.max_name_words, config.max_api_words)
    pairs = prepare_pairs(units, caps)
    result = evaluate(
        store, config, vocab, pairs,
        folds=args.folds, ks=tuple(args.ks), mrr_cutoff=args.mrr_cutoff,
        seed=args.seed,
    )
    print(result.to_json())
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    count = write_synthetic_corpus(args.n, args.seed, args.out)
    print(f"wrote {count} synthetic units to {args.out}")
    return 0


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="solsearch",
        description="Semantic code search for Solidity functions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="extract function units from .sol files")
    p.add_argument("--src", required=True, help="directory of Solidity sources")
    p.add_argument("--out", required=True, help="corpus JSONL output path")
    p.add_argument("--dedup", action="store_true", help="drop duplicate bodies")
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("graph", help="print the dependency graph of one unit")
    p.add_argument("--corpus", required=True)
    p.add_argument("--id", required=True, help="unit id from the corpus")
    p.add_argument("--dot", action="store_true", help="emit Graphviz DOT")
    p.set_defaults(fn=_cmd_graph)

    p = sub.add_parser("train", help="train a model on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--out-dim", type=int, default=64)
    p.add_argument("--heads", type=int, default=8)
    p.add_argument("--graph-heads", type=int, default=8)
    p.add_argument("--margin", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--folds", type=int, default=0,
                   help="also run k-fold cross-validation before the final fit")
    p.add_argument("--modalities", default="",
                   help="comma list from T,F,A,G (default: all)")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("index", help="embed a corpus into a search index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_index)

    p = sub.add_parser("search", help="query an index")
    p.add_argument("--index", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--provider", default="",
                   help="external embedding provider command")
    p.set_defaults(fn=_cmd_search)

    p = sub.add_parser("eval", help="cross-validated retrieval metrics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--ks", type=_int_list, default=[1, 5, 10])
    p.add_argument("--mrr-cutoff", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
