"""Two-phase pairwise training.

Phase one fits the scorer to topical relevance pairs, phase two continues
from those weights on eligibility pairs. Each phase samples uniformly with
replacement from its pair pool, descends the mean hinge loss in batches,
and keeps the snapshot with the best dev precision.
"""

from __future__ import annotations

import copy
import random
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .data import ConfigError, DataError, TrainingPair, precision_at_k
from .model import PAD_ID, PairScorer, encode_pair, hinge_loss

PHASE_ORDER = {"topical": "init", "criteria": "topical"}

# Defaults the source material leaves open; recorded here and in the CLI help.
DEFAULT_LR = 1e-3
DEFAULT_OPTIMIZER = "adam"


@dataclass(frozen=True)
class Schedule:
    phase: str
    samples_per_epoch: int
    batch_size: int = 16
    max_epochs: int = 10
    patience: int = 3
    lr: float = DEFAULT_LR
    optimizer: str = DEFAULT_OPTIMIZER

    def __post_init__(self):
        if self.phase not in PHASE_ORDER:
            raise ConfigError(f"unknown phase {self.phase!r}")
        if self.samples_per_epoch < 1 or self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("schedule counts must be positive")
        if self.lr < 0:
            raise ConfigError("learning rate must be non-negative")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


def topical_schedule(**overrides) -> Schedule:
    return Schedule(phase="topical", samples_per_epoch=8192, **overrides)


def criteria_schedule(**overrides) -> Schedule:
    return Schedule(phase="criteria", samples_per_epoch=1024, **overrides)


@dataclass
class RerankerState:
    model: PairScorer
    phase: str = "init"
    checkpoint_id: str = "tiny-random"
    # per-epoch {"loss": mean hinge, "dev": precision or None} from the
    # phase that produced this state
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class DevSet:
    """Held-out topics for early stopping, evaluated as P@10 after reordering."""

    topics: dict[str, str]
    candidates: dict[str, list[str]]
    doc_texts: dict[str, str]
    qrels: dict[str, dict[str, int]]
    k: int = 10
    threshold: int = 2


def fresh_state(seed: int = 0, **model_kwargs) -> RerankerState:
    return RerankerState(model=PairScorer(seed=seed, **model_kwargs))


def reorder_by_scores(items: list, scores: list[float]) -> list:
    """Descending by score, stable on the incoming position for ties."""
    order = sorted(range(len(items)), key=lambda i: (-scores[i], i))
    return [items[i] for i in order]


def dev_precision(model: PairScorer, dev: DevSet) -> float:
    values = []
    for topic_id in sorted(dev.topics):
        cands = dev.candidates.get(topic_id, [])
        if not cands:
            values.append(0.0)
            continue
        try:
            texts = [dev.doc_texts[d] for d in cands]
        except KeyError as exc:
            raise DataError(f"dev candidate {exc.args[0]} has no document text") from None
        scores = model.score_texts(dev.topics[topic_id], texts)
        ranked = reorder_by_scores(cands, scores)
        values.append(precision_at_k(ranked, dev.qrels.get(topic_id, {}),
                                     dev.k, dev.threshold))
    return sum(values) / len(values) if values else 0.0


def _batch(pairs: list[TrainingPair], max_len: int) -> tuple[torch.Tensor, torch.Tensor]:
    pos = [encode_pair(p.query, p.d_pos, max_len) for p in pairs]
    neg = [encode_pair(p.query, p.d_neg, max_len) for p in pairs]
    width = max(len(s) for s in pos + neg)
    out = []
    for seqs in (pos, neg):
        t = torch.full((len(seqs), width), PAD_ID, dtype=torch.long)
        for i, s in enumerate(seqs):
            t[i, :len(s)] = torch.tensor(s, dtype=torch.long)
        out.append(t)
    return out[0], out[1]


def train_phase(state: RerankerState, pairs: list[TrainingPair], schedule: Schedule,
                dev: DevSet | None = None, seed: int = 0) -> RerankerState:
    """One training phase; returns the snapshot with the best dev precision.

    Without a dev set the final epoch's parameters are returned. Training
    stops early once `schedule.patience` epochs pass without a new best.
    """
    if not pairs:
        raise DataError(f"no training pairs for phase {schedule.phase!r}")
    wrong = [p.phase for p in pairs if p.phase != schedule.phase]
    if wrong:
        raise ConfigError(
            f"schedule is for phase {schedule.phase!r} but pairs include {wrong[0]!r}"
        )
    if state.phase != PHASE_ORDER[schedule.phase]:
        raise ConfigError(
            f"phase {schedule.phase!r} expects a {PHASE_ORDER[schedule.phase]!r} "
            f"state, got {state.phase!r}"
        )

    model = copy.deepcopy(state.model)
    if schedule.optimizer == "adam":
        opt = torch.optim.Adam(model.parameters(), lr=schedule.lr)
    else:
        opt = torch.optim.SGD(model.parameters(), lr=schedule.lr)
    rng = random.Random(seed)

    best_snapshot = copy.deepcopy(model.state_dict())
    best_metric = dev_precision(model, dev) if dev is not None else None
    stale = 0
    history = []

    for _ in range(schedule.max_epochs):
        model.train()
        sampled = [pairs[rng.randrange(len(pairs))] for _ in range(schedule.samples_per_epoch)]
        batch_losses = []
        for start in range(0, len(sampled), schedule.batch_size):
            batch = sampled[start:start + schedule.batch_size]
            pos_ids, neg_ids = _batch(batch, model.max_len)
            opt.zero_grad()
            loss = hinge_loss(model(pos_ids), model(neg_ids)).mean()
            loss.backward()
            opt.step()
            batch_losses.append(loss.item())
        epoch = {"loss": sum(batch_losses) / len(batch_losses), "dev": None}
        if dev is None:
            best_snapshot = copy.deepcopy(model.state_dict())
            history.append(epoch)
            continue
        metric = dev_precision(model, dev)
        epoch["dev"] = metric
        history.append(epoch)
        if metric > best_metric:
            best_metric = metric
            best_snapshot = copy.deepcopy(model.state_dict())
            stale = 0
        else:
            stale += 1
            if stale >= schedule.patience:
                break

    model.load_state_dict(best_snapshot)
    return RerankerState(model=model, phase=schedule.phase,
                         checkpoint_id=state.checkpoint_id, history=history)


def save_state(state: RerankerState, path: str | Path) -> None:
    torch.save(
        {
            "phase": state.phase,
            "checkpoint_id": state.checkpoint_id,
            "vocab_size": state.model.embed.num_embeddings,
            "d_model": state.model.embed.embedding_dim,
            "max_len": state.model.max_len,
            "parameters": state.model.state_dict(),
        },
        path,
    )


def load_state(path: str | Path) -> RerankerState:
    try:
        blob = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise DataError(f"cannot load checkpoint {path}: {exc}") from None
    for key in ("phase", "checkpoint_id", "vocab_size", "d_model", "max_len", "parameters"):
        if key not in blob:
            raise DataError(f"checkpoint {path} is missing field {key!r}")
    model = PairScorer(vocab_size=blob["vocab_size"], d_model=blob["d_model"],
                       max_len=blob["max_len"])
    model.load_state_dict(blob["parameters"])
    return RerankerState(model=model, phase=blob["phase"],
                         checkpoint_id=blob["checkpoint_id"])
