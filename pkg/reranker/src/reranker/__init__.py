"""Neural re-scoring for clinical trial runs, trained in two phases."""

from .data import (
    ConfigError,
    DataError,
    RunEntry,
    TrainingPair,
    build_pairs,
    load_doc_texts,
    load_labeled_docs,
    load_topic_texts,
    precision_at_k,
    read_qrels,
    read_run,
    split_topics,
    write_run,
)
from .model import PairScorer, encode_pair, hinge_loss, token_ids, tokenize
from .rerank import SIDECAR_HEADER, render_sidecar, rerank_run
from .train import (
    DevSet,
    RerankerState,
    Schedule,
    criteria_schedule,
    dev_precision,
    fresh_state,
    load_state,
    save_state,
    topical_schedule,
    train_phase,
)

__all__ = [
    "ConfigError",
    "DataError",
    "DevSet",
    "PairScorer",
    "RerankerState",
    "RunEntry",
    "Schedule",
    "SIDECAR_HEADER",
    "TrainingPair",
    "build_pairs",
    "criteria_schedule",
    "dev_precision",
    "encode_pair",
    "fresh_state",
    "hinge_loss",
    "load_doc_texts",
    "load_labeled_docs",
    "load_state",
    "load_topic_texts",
    "precision_at_k",
    "read_qrels",
    "read_run",
    "render_sidecar",
    "rerank_run",
    "save_state",
    "split_topics",
    "token_ids",
    "tokenize",
    "topical_schedule",
    "train_phase",
    "write_run",
]
