"""Command-line entry points: train the two-phase scorer, apply it to a run.

All exchange with the retrieval pipeline is through files: labeled-document
JSONL from its export-pairs subcommand, document texts from export-docs,
topic annotations, TREC run files, and the tab-separated score sidecar its
rerank-apply subcommand consumes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import (
    ConfigError,
    DataError,
    build_pairs,
    load_doc_texts,
    load_labeled_docs,
    load_topic_texts,
    read_qrels,
    read_run,
    split_topics,
    write_run,
)
from .rerank import render_sidecar, rerank_run
from .train import (
    DevSet,
    Schedule,
    fresh_state,
    load_state,
    save_state,
    train_phase,
)


def _dev_set(dev_topics, topic_texts, run, docs, qrels, field, k, threshold):
    candidates = {}
    texts = {}
    for topic_id in dev_topics:
        entries = run.get(topic_id)
        if not entries:
            continue
        if topic_id not in topic_texts:
            raise DataError(
                f"dev topic {topic_id} has no text; pass --topics with the topic export"
            )
        texts[topic_id] = topic_texts[topic_id]
        candidates[topic_id] = [e.doc_id for e in entries[:k]]
    doc_texts = {}
    for doc_ids in candidates.values():
        for d in doc_ids:
            if d not in docs:
                raise DataError(f"run doc {d} has no text in the document export")
            doc_texts[d] = docs[d][field]
    return DevSet(topics=texts, candidates=candidates, doc_texts=doc_texts,
                  qrels=qrels, k=10, threshold=threshold)


def cmd_train(args) -> int:
    records_topical = load_labeled_docs(args.pairs_topical)
    records_criteria = load_labeled_docs(args.pairs_criteria)
    docs = load_doc_texts(args.docs)
    run = read_run(args.run)
    qrels = read_qrels(args.qrels)

    topic_texts = {}
    for r in records_topical + records_criteria:
        topic_texts.setdefault(r["topic_id"], r["topic_text"])
    if args.topics:
        topic_texts.update(load_topic_texts(args.topics))

    train_ids, dev_ids, test_ids = split_topics(sorted(qrels), seed=args.split_seed)
    split_path = Path(args.out) / "split.json"
    Path(args.out).mkdir(parents=True, exist_ok=True)
    split_path.write_text(
        json.dumps({"train": train_ids, "dev": dev_ids, "test": test_ids}, indent=2) + "\n",
        encoding="utf-8",
    )

    train_set = set(train_ids)
    pairs_topical = [
        p for p in build_pairs(records_topical, "topical") if p.topic_id in train_set
    ]
    pairs_criteria = [
        p for p in build_pairs(records_criteria, "criteria") if p.topic_id in train_set
    ]

    common = dict(batch_size=args.batch_size, max_epochs=args.epochs,
                  patience=args.patience, lr=args.lr, optimizer=args.optimizer)
    sched_topical = Schedule(phase="topical", samples_per_epoch=args.samples_topical, **common)
    sched_criteria = Schedule(phase="criteria", samples_per_epoch=args.samples_criteria, **common)

    dev_topical = _dev_set(dev_ids, topic_texts, run, docs, qrels,
                           "topical_text", args.k, args.relevance_threshold)
    dev_criteria = _dev_set(dev_ids, topic_texts, run, docs, qrels,
                            "criteria_text", args.k, args.relevance_threshold)

    if args.max_len < 8:
        raise ConfigError("--max-len below 8 leaves no room for any document text")
    state = fresh_state(seed=args.seed, max_len=args.max_len)
    state = train_phase(state, pairs_topical, sched_topical,
                        dev=dev_topical if dev_topical.topics else None, seed=args.seed)
    save_state(state, Path(args.out) / "topical.pt")
    state = train_phase(state, pairs_criteria, sched_criteria,
                        dev=dev_criteria if dev_criteria.topics else None, seed=args.seed + 1)
    save_state(state, Path(args.out) / "criteria.pt")
    print(f"wrote {args.out}/topical.pt, {args.out}/criteria.pt, {split_path}")
    return 0


def cmd_apply(args) -> int:
    state_topical = load_state(args.topical)
    state_criteria = load_state(args.criteria)
    run = read_run(args.run)
    topics = load_topic_texts(args.topics)
    docs = load_doc_texts(args.docs)
    reranked, sidecar = rerank_run(
        state_topical, state_criteria, run, topics, docs,
        k=args.k, tag=args.tag, fusion_weight=args.fusion_weight,
    )
    write_run(reranked, args.out)
    if args.sidecar:
        Path(args.sidecar).write_text(render_sidecar(sidecar), encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="trial-rerank",
        description="train and apply a two-phase neural re-scorer for trial runs",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the topical then the eligibility objective")
    p.add_argument("--pairs-topical", required=True, help="export-pairs JSONL, topical phase")
    p.add_argument("--pairs-criteria", required=True, help="export-pairs JSONL, criteria phase")
    p.add_argument("--docs", required=True, help="export-docs JSONL")
    p.add_argument("--run", required=True, help="first-stage run for dev candidates")
    p.add_argument("--qrels", required=True, help="graded judgments for split and dev metric")
    p.add_argument("--topics", help="topic annotation JSONL (texts for dev topics)")
    p.add_argument("--out", required=True, help="directory for topical.pt and criteria.pt")
    p.add_argument("--samples-topical", type=int, default=8192)
    p.add_argument("--samples-criteria", type=int, default=1024)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--k", type=int, default=50, help="candidate depth for dev reordering")
    p.add_argument("--relevance-threshold", type=int, default=2)
    p.add_argument("--max-len", type=int, default=64,
                   help="encoder sequence budget; raise it for long patient narratives")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=13)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("apply", help="re-score a run's top-k with trained checkpoints")
    p.add_argument("--topical", required=True, help="topical-phase checkpoint")
    p.add_argument("--criteria", required=True, help="criteria-phase checkpoint")
    p.add_argument("--run", required=True, help="first-stage run file")
    p.add_argument("--topics", required=True, help="topic annotation JSONL")
    p.add_argument("--docs", required=True, help="export-docs JSONL")
    p.add_argument("--out", required=True, help="reordered run file")
    p.add_argument("--sidecar", help="tab-separated stage scores for rerank-apply")
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--tag", default="rerank")
    p.add_argument("--fusion-weight", type=float, default=None,
                   help="blend stage scores instead of sequential reordering")
    p.set_defaults(handler=cmd_apply)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
