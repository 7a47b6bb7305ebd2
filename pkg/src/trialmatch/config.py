"""Run configuration: one JSON file per experiment, flag overrides on top."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

# Default document representation: descriptive sections plus the inclusion
# criteria list, the combination that held up best in section ablations.
DEFAULT_SECTIONS = (
    "summary",
    "description",
    "brief_title",
    "official_title",
    "conditions",
    "inclusion",
)

DEFAULT_METRICS = ("ndcg@5", "ndcg@10", "p@10", "rr")

_PATH_KEYS = (
    "corpus",
    "topics",
    "qrels",
    "gazetteer",
    "triggers",
    "stopwords",
    "abbreviations",
)


@dataclass
class RunConfig:
    corpus: str | None = None
    topics: str | None = None
    qrels: str | None = None
    gazetteer: str | None = None
    triggers: str | None = None
    stopwords: str | None = None
    abbreviations: str | None = None
    corpus_fields: dict = field(default_factory=dict)
    model: str = "bm25plus"
    sections: tuple[str, ...] = DEFAULT_SECTIONS
    enrichment: str = ""
    filters: tuple[str, ...] = ()
    k: int = 1000
    relevance_threshold: int = 2
    metrics: tuple[str, ...] = DEFAULT_METRICS
    tag: str = "trialmatch"
    ablation: tuple[dict, ...] = ()

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.relevance_threshold not in (1, 2):
            raise ConfigError(
                f"relevance_threshold must be 1 or 2, got {self.relevance_threshold}"
            )

    def require(self, *names: str) -> None:
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"missing required config value: {name}")
            if name in _PATH_KEYS and not Path(value).exists():
                raise ConfigError(f"{name} path does not exist: {value}")


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional JSON file plus non-None overrides.

    Relative paths inside the file resolve against the file's directory;
    override paths resolve against the working directory as given.
    """
    values: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text("utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        known = {f.name for f in fields(RunConfig)}
        for key in raw:
            if key not in known:
                raise ConfigError(f"{path}: unknown config key {key!r}")
        base = Path(path).parent
        for key, value in raw.items():
            if key in _PATH_KEYS and isinstance(value, str):
                value = str((base / value)) if not Path(value).is_absolute() else value
            values[key] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    for key in ("sections", "filters", "metrics"):
        if key in values and isinstance(values[key], (list, tuple)):
            values[key] = tuple(values[key])
    if "ablation" in values:
        values["ablation"] = tuple(values["ablation"])
    return RunConfig(**values)
