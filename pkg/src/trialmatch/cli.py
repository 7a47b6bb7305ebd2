"""Command line pipeline: annotate, index, search, filter, eval, ablation,
training-pair export, and score-sidecar re-rank application.

Every stage reads declared input files and writes declared output files;
re-running a stage with identical inputs produces byte-identical outputs.
Exit codes: 0 success, 1 data error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import annotate as ann
from .config import DEFAULT_METRICS, RunConfig, load_config
from .corpus import ClinicalTrial, CorpusFields, Gender, load_corpus, split_criteria
from .errors import ConfigError, DataError
from .evaluation import (
    Qrels,
    RunEntry,
    count_at_cutoffs,
    evaluate_run,
    format_score,
    ranking_from_scores,
    read_qrels,
    read_run,
    render_counts_csv,
    render_report_json,
    render_report_tsv,
    write_run,
)
from .filters import FilterConfig, apply_filters, trial_lifestyle_exclusions
from .index import (
    Model,
    SectionConfig,
    build_index,
    load_stopwords,
    read_index,
    search,
    section_text,
    write_index,
)
from .topics import PatientTopic, build_query, build_topic, parse_topics


def _write_lines(lines: list[str], path: str | Path) -> None:
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _write_jsonl(records: list[dict], path: str | Path) -> None:
    _write_lines([json.dumps(r, sort_keys=True) for r in records], path)


def _read_jsonl(path: str | Path) -> list[dict]:
    records = []
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path} line {lineno}: bad JSON: {exc}") from None
    return records


def _lexicons(cfg: RunConfig):
    gazetteer = ann.load_gazetteer(cfg.gazetteer)
    triggers = ann.load_triggers(cfg.triggers)
    abbreviations = ann.load_abbreviations(cfg.abbreviations)
    return gazetteer, triggers, abbreviations


def _trials(cfg: RunConfig) -> list[ClinicalTrial]:
    cfg.require("corpus")
    return load_corpus(cfg.corpus, CorpusFields.from_overrides(cfg.corpus_fields))


def descriptive_text(trial: ClinicalTrial) -> str:
    """The non-criteria document text used for topical matching."""
    parts = [
        trial.brief_title,
        trial.official_title,
        trial.summary,
        trial.description,
        " ".join(trial.conditions),
    ]
    return " ".join(p for p in parts if p)


def _topic_records(cfg: RunConfig) -> list[dict]:
    cfg.require("topics")
    gazetteer, triggers, abbreviations = _lexicons(cfg)
    records = []
    for topic_id, text in parse_topics(cfg.topics):
        topic = build_topic(topic_id, text, gazetteer, triggers, abbreviations)
        records.append(
            {
                "topic_id": topic.topic_id,
                "text": topic.text,
                "age_years": topic.age_years,
                "gender": topic.gender.value if topic.gender else None,
                "smoker": topic.smoker,
                "drinker": topic.drinker,
                **topic.keywords.to_dict(),
            }
        )
    return records


def _topic_from_record(record: dict) -> PatientTopic:
    gender = record.get("gender")
    return PatientTopic(
        topic_id=record["topic_id"],
        text=record.get("text", ""),
        age_years=record.get("age_years"),
        gender=Gender(gender) if gender else None,
        smoker=record.get("smoker"),
        drinker=record.get("drinker"),
        keywords=ann.KeywordSet.from_dict(record),
    )


def _corpus_keywords_from_sidecar(path: str | Path, trials: list[ClinicalTrial]) -> dict:
    by_id = {r["nct_id"]: ann.KeywordSet.from_dict(r) for r in _read_jsonl(path)}
    missing = [t.nct_id for t in trials if t.nct_id not in by_id]
    if missing:
        raise DataError(
            f"{path}: no annotation record for corpus docs: {', '.join(missing[:5])}"
        )
    return by_id


def cmd_annotate(cfg: RunConfig, args) -> int:
    gazetteer, triggers, abbreviations = _lexicons(cfg)
    if args.what == "corpus":
        records = []
        for trial in _trials(cfg):
            keywords = ann.keywords_for_criteria(
                split_criteria(trial.criteria_text), gazetteer, triggers, abbreviations
            )
            records.append({"nct_id": trial.nct_id, **keywords.to_dict()})
        _write_jsonl(records, args.out)
    else:
        _write_jsonl(_topic_records(cfg), args.out)
    return 0


def cmd_index(cfg: RunConfig, args) -> int:
    trials = _trials(cfg)
    section_cfg = SectionConfig.make(cfg.sections, cfg.enrichment)
    if section_cfg.enrichment and not args.annotations:
        raise ConfigError("enrichment flags are set; pass --annotations with the corpus sidecar")
    if args.annotations:
        keywords = _corpus_keywords_from_sidecar(args.annotations, trials)
    else:
        keywords = {}
    stopwords = load_stopwords(cfg.stopwords)
    pairs = [(t, keywords.get(t.nct_id, ann.KeywordSet())) for t in trials]
    write_index(build_index(pairs, section_cfg, stopwords), args.out)
    return 0


def cmd_search(cfg: RunConfig, args) -> int:
    index = read_index(args.index)
    expected = SectionConfig.make(cfg.sections, cfg.enrichment)
    if index.config != expected:
        raise ConfigError(
            f"stale index {args.index}: built with sections={list(index.config.sections)} "
            f"enrichment={sorted(index.config.enrichment)}, but the run config wants "
            f"sections={list(expected.sections)} enrichment={sorted(expected.enrichment)}; rebuild it"
        )
    model = Model.parse(cfg.model)
    stopwords = load_stopwords(cfg.stopwords)
    flags = set(cfg.enrichment)
    run = {}
    for record in _read_jsonl(args.topic_annotations):
        topic = _topic_from_record(record)
        query = build_query(topic, flags, stopwords)
        scored = search(model, index, query, cfg.k)
        if scored:
            run[topic.topic_id] = ranking_from_scores(scored, cfg.tag)
    write_run(run, args.out)
    return 0


def cmd_filter(cfg: RunConfig, args) -> int:
    run = read_run(args.run)
    trials = {t.nct_id: t for t in _trials(cfg)}
    exclusions = {
        nct_id: trial_lifestyle_exclusions(split_criteria(t.criteria_text))
        for nct_id, t in trials.items()
    }
    topics = {r["topic_id"]: _topic_from_record(r) for r in _read_jsonl(args.topic_annotations)}
    filter_cfg = FilterConfig.make(cfg.filters)
    filtered = {}
    report = []
    for topic_id, entries in run.items():
        patient = topics.get(topic_id)
        if patient is None:
            raise DataError(f"run topic {topic_id} missing from {args.topic_annotations}")
        ranking = [(e.doc_id, e.score) for e in entries]
        kept, fraction = apply_filters(ranking, patient, trials, exclusions, filter_cfg)
        filtered[topic_id] = ranking_from_scores(kept, cfg.tag)
        report.append(
            {
                "topic_id": topic_id,
                "flags": sorted(filter_cfg.flags),
                "removed": len(ranking) - len(kept),
                "removed_fraction": fraction,
            }
        )
    write_run(filtered, args.out)
    if args.report:
        _write_jsonl(report, args.report)
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    cfg.require("qrels")
    run = read_run(args.run)
    qrels = read_qrels(cfg.qrels)
    metrics = list(cfg.metrics)
    per_topic, means = evaluate_run(run, qrels, metrics, cfg.relevance_threshold)
    tsv = render_report_tsv(per_topic, means, metrics)
    if args.out:
        Path(args.out).write_text(tsv, encoding="utf-8")
    else:
        sys.stdout.write(tsv)
    if args.json_out:
        Path(args.json_out).write_text(render_report_json(per_topic, means), encoding="utf-8")
    if args.cutoff_counts:
        rows = count_at_cutoffs(run, qrels, args.max_k)
        Path(args.cutoff_counts).write_text(render_counts_csv(rows), encoding="utf-8")
    return 0


def run_ablation(cfg: RunConfig, section_sets: list[dict]) -> list[tuple[str, dict]]:
    """Index+search+eval once per section set; returns (name, metric means) rows."""
    if not section_sets:
        raise ConfigError("ablation needs at least one section set")
    cfg.require("qrels")
    trials = _trials(cfg)
    gazetteer, triggers, abbreviations = _lexicons(cfg)
    stopwords = load_stopwords(cfg.stopwords)
    corpus_keywords = {
        t.nct_id: ann.keywords_for_criteria(
            split_criteria(t.criteria_text), gazetteer, triggers, abbreviations
        )
        for t in trials
    }
    topics = [_topic_from_record(r) for r in _topic_records(cfg)]
    qrels = read_qrels(cfg.qrels)
    model = Model.parse(cfg.model)
    metrics = list(cfg.metrics)
    rows = []
    for spec_entry in section_sets:
        sections = spec_entry.get("sections", cfg.sections)
        if not sections:
            raise ConfigError(
                "ablation entry %r has no sections and the config sets none"
                % spec_entry.get("name", "?")
            )
        name = spec_entry.get("name") or "+".join(sections)
        section_cfg = SectionConfig.make(
            sections, spec_entry.get("enrichment", cfg.enrichment)
        )
        pairs = [(t, corpus_keywords[t.nct_id]) for t in trials]
        index = build_index(pairs, section_cfg, stopwords)
        run = {}
        for topic in topics:
            query = build_query(topic, set(section_cfg.enrichment), stopwords)
            scored = search(model, index, query, cfg.k)
            if scored:
                run[topic.topic_id] = ranking_from_scores(scored, cfg.tag)
        _, means = evaluate_run(run, qrels, metrics, cfg.relevance_threshold)
        rows.append((name, means))
    return rows


def cmd_ablation(cfg: RunConfig, args) -> int:
    rows = run_ablation(cfg, list(cfg.ablation))
    metrics = list(cfg.metrics)
    lines = ["name\t" + "\t".join(metrics)]
    for name, means in rows:
        lines.append(name + "\t" + "\t".join(format_score(means[m]) for m in metrics))
    if args.out:
        _write_lines(lines, args.out)
    else:
        sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_export_pairs(cfg: RunConfig, args) -> int:
    cfg.require("qrels", "topics")
    run = read_run(args.run)
    qrels = read_qrels(cfg.qrels)
    trials = {t.nct_id: t for t in _trials(cfg)}
    topic_texts = dict(parse_topics(cfg.topics))
    phase = args.phase
    records = []
    for topic_id in qrels.topics():
        entries = run.get(topic_id)
        if not entries or topic_id not in topic_texts:
            continue
        judgments = qrels.for_topic(topic_id)
        labeled = []
        for e in entries:
            grade = judgments.get(e.doc_id)
            if phase == "topical":
                label = "pos" if (grade or 0) >= 1 else "neg"
            else:
                if grade == 2:
                    label = "pos"
                elif grade == 1:
                    label = "neg"
                else:
                    continue
            labeled.append((e.doc_id, label))
        if not any(label == "pos" for _, label in labeled):
            print(f"warning: topic {topic_id} has no {phase} positives; skipped", file=sys.stderr)
            continue
        for doc_id, label in labeled:
            trial = trials.get(doc_id)
            if trial is None:
                raise DataError(f"run doc {doc_id} not present in corpus")
            doc_text = (
                descriptive_text(trial) if phase == "topical" else trial.criteria_text
            )
            records.append(
                {
                    "topic_id": topic_id,
                    "topic_text": topic_texts[topic_id],
                    "doc_id": doc_id,
                    "doc_text": doc_text,
                    "label": label,
                    "phase": phase,
                }
            )
    _write_jsonl(records, args.out)
    return 0


def cmd_export_docs(cfg: RunConfig, args) -> int:
    records = [
        {
            "doc_id": t.nct_id,
            "topical_text": descriptive_text(t),
            "criteria_text": t.criteria_text,
        }
        for t in _trials(cfg)
    ]
    _write_jsonl(records, args.out)
    return 0


SCORES_HEADER = "topic_id\tdoc_id\tstage1_score\tstage2_score"


def read_score_sidecar(path: str | Path) -> dict[tuple[str, str], tuple[float, float]]:
    lines = Path(path).read_text("utf-8").splitlines()
    if not lines or lines[0] != SCORES_HEADER:
        raise DataError(f"{path}: first line must be `{SCORES_HEADER}`")
    scores: dict[tuple[str, str], tuple[float, float]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"{path} line {lineno}: expected 4 tab-separated fields")
        topic_id, doc_id, s1, s2 = parts
        if (topic_id, doc_id) in scores:
            raise DataError(f"{path} line {lineno}: duplicate ({topic_id}, {doc_id})")
        try:
            scores[(topic_id, doc_id)] = (float(s1), float(s2))
        except ValueError:
            raise DataError(f"{path} line {lineno}: bad score") from None
    return scores


def apply_rerank_scores(
    entries: list[RunEntry], scores: dict, topic_id: str, k: int, tag: str
) -> list[RunEntry]:
    """Reorder the top-k by stage-1 then stage-2 score (both stable, descending);
    the tail keeps its order with scores shifted below the new minimum."""
    top, tail = entries[:k], entries[k:]
    for e in top:
        if (topic_id, e.doc_id) not in scores:
            raise DataError(f"no rerank scores for topic {topic_id} doc {e.doc_id}")
    stage1 = sorted(top, key=lambda e: -scores[(topic_id, e.doc_id)][0])
    stage2 = sorted(stage1, key=lambda e: -scores[(topic_id, e.doc_id)][1])
    new_scores = [scores[(topic_id, e.doc_id)][1] for e in stage2]
    result = list(zip((e.doc_id for e in stage2), new_scores))
    if tail:
        shift = (min(new_scores) - 1.0) - max(e.score for e in tail)
        result.extend((e.doc_id, e.score + shift) for e in tail)
    return [RunEntry(doc_id, i + 1, s, tag) for i, (doc_id, s) in enumerate(result)]


def cmd_rerank_apply(cfg: RunConfig, args) -> int:
    run = read_run(args.run)
    scores = read_score_sidecar(args.scores)
    reranked = {
        topic_id: apply_rerank_scores(entries, scores, topic_id, args.k, cfg.tag)
        for topic_id, entries in run.items()
    }
    write_run(reranked, args.out)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON run configuration file")
    parser.add_argument("--corpus", help="corpus path (directory of XML or one file)")
    parser.add_argument("--topics", help="topics file (XML or TSV)")
    parser.add_argument("--qrels", help="qrels file")
    parser.add_argument("--gazetteer", help="gazetteer TSV (default: shipped)")
    parser.add_argument("--triggers", help="trigger TSV (default: shipped)")
    parser.add_argument("--stopwords", help="stopword file (default: shipped)")
    parser.add_argument("--abbreviations", help="abbreviation file (default: shipped)")
    parser.add_argument("--model", help="scoring model: bm25plus, tfidf, in_expb2")
    parser.add_argument("--sections", help="comma-separated section list")
    parser.add_argument("--enrichment", help="enrichment flags, e.g. cpf")
    parser.add_argument("--filters", help="comma-separated filter flags")
    parser.add_argument("--k", type=int, help="retrieval depth")
    parser.add_argument("--metrics", help="comma-separated metric list")
    parser.add_argument(
        "--relevance-threshold", type=int, dest="relevance_threshold",
        help="grade threshold for P@k and RR (1 or 2)",
    )
    parser.add_argument("--tag", help="run tag")


def _overrides(args) -> dict:
    values = {
        name: getattr(args, name, None)
        for name in (
            "corpus", "topics", "qrels", "gazetteer", "triggers", "stopwords",
            "abbreviations", "model", "enrichment", "k", "relevance_threshold", "tag",
        )
    }
    for name in ("sections", "filters", "metrics"):
        raw = getattr(args, name, None)
        if raw is not None:
            values[name] = tuple(s.strip() for s in raw.split(",") if s.strip())
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trialmatch",
        description="Patient-to-clinical-trial retrieval pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("annotate", help="write a keyword sidecar for the corpus or topics")
    _add_common(p)
    p.add_argument("--what", choices=("corpus", "topics"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_annotate)

    p = sub.add_parser("index", help="build and persist the inverted index")
    _add_common(p)
    p.add_argument("--annotations", help="corpus keyword sidecar (needed with enrichment)")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_index)

    p = sub.add_parser("search", help="retrieve a run file for annotated topics")
    _add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--topic-annotations", dest="topic_annotations", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_search)

    p = sub.add_parser("filter", help="apply demographic/lifestyle filters to a run")
    _add_common(p)
    p.add_argument("--run", required=True)
    p.add_argument("--topic-annotations", dest="topic_annotations", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="per-topic filter report JSONL")
    p.set_defaults(handler=cmd_filter)

    p = sub.add_parser("eval", help="score a run against qrels")
    _add_common(p)
    p.add_argument("--run", required=True)
    p.add_argument("--out", help="TSV report path (default: stdout)")
    p.add_argument("--json-out", dest="json_out", help="JSON report path")
    p.add_argument("--cutoff-counts", dest="cutoff_counts", help="CSV of per-k mean counts")
    p.add_argument("--max-k", dest="max_k", type=int, default=20)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("ablation", help="evaluate every section set from the config")
    _add_common(p)
    p.add_argument("--out", help="result TSV (default: stdout)")
    p.set_defaults(handler=cmd_ablation)

    p = sub.add_parser("export-pairs", help="emit labeled training documents per topic")
    _add_common(p)
    p.add_argument("--run", required=True)
    p.add_argument("--phase", choices=("topical", "criteria"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_export_pairs)

    p = sub.add_parser("export-docs", help="emit per-document topical/criteria texts")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_export_docs)

    p = sub.add_parser("rerank-apply", help="reorder a run's top-k from a score sidecar")
    _add_common(p)
    p.add_argument("--run", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_rerank_apply)
    p.set_defaults(k=None)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        if getattr(args, "k", None) is None and args.command == "rerank-apply":
            args.k = 50
        return args.handler(cfg, args)
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


if __name__ == "__main__":
    entrypoint()
