"""Patient-to-clinical-trial retrieval: criteria-aware enrichment, lexical
ranking, demographic filtering, and graded-relevance evaluation."""

from .annotate import (
    Gazetteer,
    KeywordSet,
    Mention,
    TriggerLexicon,
    build_keyword_set,
    emit_enrichment_tokens,
    extract_mentions,
    apply_context,
    classify_section,
    swap_exclusion_polarity,
    split_sentences,
)
from .corpus import ClinicalTrial, CriteriaLists, Gender, parse_trial, split_criteria
from .errors import ConfigError, DataError, TrialMatchError, TrialParseError
from .evaluation import (
    Qrels,
    RunEntry,
    count_at_cutoffs,
    evaluate_run,
    ndcg_at_k,
    paired_t_test,
    precision_at_k,
    read_qrels,
    read_run,
    reciprocal_rank,
    write_run,
)
from .filters import FilterConfig, demographic_filter, lifestyle_filter
from .index import Index, Model, SectionConfig, build_index, score, search, tokenize
from .topics import PatientTopic, build_query, extract_demographics, parse_topics

__version__ = "0.1.0"
