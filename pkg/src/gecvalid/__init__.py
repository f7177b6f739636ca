"""Validation of grammatical-error-correction metrics without human rankings.

Gold edit annotations induce a lattice of partial corrections per sentence;
subset containment gives a gold partial order of quality.  This package
parses M2 corpora, samples corrections and chains from the lattices, scores
them with the common GEC metrics, and reports how well each metric agrees
with the gold order at the corpus level, the sentence level, and per error
type.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    Annotation,
    Corpus,
    Edit,
    M2ParseError,
    OverlapError,
    SentenceRecord,
    apply_edits,
    load_m2,
    parse_m2,
    realize_reference,
    resolve_intersections,
    to_m2,
)
from .lattice import (  # noqa: F401
    Chain,
    Correction,
    CorrectionLattice,
    CorpusModel,
    comparable_pairs,
    leq,
    quality_score,
    sample_chains,
    sample_model_corpus,
    sample_source_corpus,
    single_edit_pairs,
)
from .metrics import EvalInput, MetricConfig, corpus_score, count_imeasure_refs, score  # noqa: F401
from .stats import CorrelationReport, kendall_tau_partial, pearson, rank_systems, spearman  # noqa: F401
