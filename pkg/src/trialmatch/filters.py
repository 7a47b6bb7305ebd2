"""Post-retrieval demographic and lifestyle filtering of ranked trials."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .annotate import TOKEN_RE
from .corpus import ClinicalTrial, CriteriaLists, Gender
from .errors import ConfigError, DataError
from .topics import PatientTopic

FILTER_FLAGS = ("age", "gender", "smoking", "drinking")


@dataclass(frozen=True)
class FilterConfig:
    flags: frozenset[str] = frozenset()

    def __post_init__(self):
        for f in self.flags:
            if f not in FILTER_FLAGS:
                raise ConfigError(
                    f"unknown filter flag {f!r} (expected one of: {', '.join(FILTER_FLAGS)})"
                )

    @classmethod
    def make(cls, flags) -> "FilterConfig":
        return cls(frozenset(flags))


def _age_ineligible(patient_age: float, trial: ClinicalTrial) -> bool:
    if trial.min_age is not None and patient_age < trial.min_age:
        return True
    if trial.max_age is not None and patient_age > trial.max_age:
        return True
    return False


def demographic_filter(
    ranking: list[tuple[str, float]],
    patient: PatientTopic,
    trials: Mapping[str, ClinicalTrial],
    cfg: FilterConfig,
) -> tuple[list[tuple[str, float]], float]:
    """Drop trials the patient fails on age or gender; bounds are inclusive.

    Unknown patient age/gender disables the corresponding check. Returns the
    surviving ranking (relative order kept) and the removed fraction.
    """
    kept = []
    for doc_id, doc_score in ranking:
        trial = trials.get(doc_id)
        if trial is None:
            raise DataError(f"ranked doc {doc_id} not present in corpus")
        if (
            "age" in cfg.flags
            and patient.age_years is not None
            and _age_ineligible(patient.age_years, trial)
        ):
            continue
        if (
            "gender" in cfg.flags
            and patient.gender is not None
            and trial.gender is not Gender.ALL
            and trial.gender is not patient.gender
        ):
            continue
        kept.append((doc_id, doc_score))
    removed = len(ranking) - len(kept)
    fraction = removed / len(ranking) if ranking else 0.0
    return kept, fraction


_SMOKING_EXCLUSION_TOKENS = frozenset(
    ["smoker", "smokers", "smoking", "tobacco", "cigarette", "cigarettes", "nicotine"]
)
_DRINKING_EXCLUSION_TOKENS = frozenset(
    ["alcohol", "alcoholic", "drinker", "drinkers", "drinking", "ethanol"]
)


def trial_lifestyle_exclusions(criteria: CriteriaLists) -> tuple[bool, bool]:
    """(excludes_smokers, excludes_drinkers) from a trial's exclusion criteria."""
    tokens: set[str] = set()
    for item in criteria.exclusion:
        tokens.update(TOKEN_RE.findall(item.lower()))
    return (
        not tokens.isdisjoint(_SMOKING_EXCLUSION_TOKENS),
        not tokens.isdisjoint(_DRINKING_EXCLUSION_TOKENS),
    )


def lifestyle_filter(
    ranking: list[tuple[str, float]],
    patient: PatientTopic,
    exclusions: Mapping[str, tuple[bool, bool]],
    cfg: FilterConfig,
) -> list[tuple[str, float]]:
    """Drop trials that exclude smokers/drinkers when the patient is one.

    Unknown patient status never drops anything. `exclusions` maps doc id to
    the precomputed (excludes_smokers, excludes_drinkers) pair.
    """
    kept = []
    for doc_id, doc_score in ranking:
        excl_smoking, excl_drinking = exclusions.get(doc_id, (False, False))
        if "smoking" in cfg.flags and patient.smoker is True and excl_smoking:
            continue
        if "drinking" in cfg.flags and patient.drinker is True and excl_drinking:
            continue
        kept.append((doc_id, doc_score))
    return kept


def apply_filters(
    ranking: list[tuple[str, float]],
    patient: PatientTopic,
    trials: Mapping[str, ClinicalTrial],
    exclusions: Mapping[str, tuple[bool, bool]],
    cfg: FilterConfig,
) -> tuple[list[tuple[str, float]], float]:
    """Demographic then lifestyle filtering; the drop set is order-independent."""
    kept, _ = demographic_filter(ranking, patient, trials, cfg)
    kept = lifestyle_filter(kept, patient, exclusions, cfg)
    removed = len(ranking) - len(kept)
    fraction = removed / len(ranking) if ranking else 0.0
    return kept, fraction
