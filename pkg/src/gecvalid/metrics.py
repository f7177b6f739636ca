"""Sentence-level correction metrics behind one interface.

Every metric maps (source, candidate, references) to a real number; scoring
operates on whitespace tokens except for the character-level similarity
measures.  Corpus scores are the arithmetic mean of sentence scores for all
metrics.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .align import extract_edits, lev_similarity
from .corpus import SentenceRecord, edits_overlap
from .seeds import derive_rng

METRIC_IDS = (
    "bleu",
    "gleu",
    "ibleu",
    "sari",
    "max_sari",
    "f_half",
    "min_ld_to_refs",
    "ld_to_source",
    "grammaticality",
)

REFERENCE_FREE = ("grammaticality", "ld_to_source")


@dataclass(frozen=True)
class MetricConfig:
    ngram_order: int = 4
    bleu_smoothing: int = 3  # Chen-Cherry method id; only 3 is implemented
    ibleu_alpha: float = 0.8
    gleu_iterations: int = 500
    gleu_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.ibleu_alpha <= 1.0:
            raise ValueError("ibleu_alpha must be in [0, 1]")
        if self.gleu_iterations < 1:
            raise ValueError("gleu_iterations must be >= 1")
        if self.bleu_smoothing != 3:
            raise ValueError("only smoothing method 3 is supported")


DEFAULT_CONFIG = MetricConfig()


@dataclass(frozen=True)
class EvalInput:
    source: str
    candidate: str
    references: tuple[str, ...]
    sentence_id: str = ""


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _require_references(references: Sequence[str]) -> None:
    if not references:
        raise ValueError("at least one reference is required")


def bleu(candidate: str, references: Sequence[str], config: MetricConfig = DEFAULT_CONFIG) -> float:
    """Smoothed 4-gram BLEU with closest-length brevity penalty.

    Zero-match precisions are replaced by 1/(2^k * denominator) for the k-th
    zero (geometric NIST-style smoothing); orders longer than the candidate
    are dropped so an exact reference match always scores 1.0.
    """
    _require_references(references)
    cand = candidate.split()
    if not cand:
        return 0.0
    refs = [r.split() for r in references]

    orders = [n for n in range(1, config.ngram_order + 1) if len(cand) - n + 1 > 0]
    fractions: list[tuple[int, int]] = []
    for n in orders:
        counts = _ngram_counts(cand, n)
        clip: Counter = Counter()
        for ref in refs:
            ref_counts = _ngram_counts(ref, n)
            for gram in counts:
                clip[gram] = max(clip[gram], ref_counts.get(gram, 0))
        numerator = sum(min(c, clip[g]) for g, c in counts.items())
        fractions.append((numerator, len(cand) - n + 1))

    zeros = 1
    log_sum = 0.0
    for numerator, denominator in fractions:
        if numerator == 0:
            p = 1.0 / (2 ** zeros * denominator)
            zeros += 1
        else:
            p = numerator / denominator
        log_sum += math.log(p)
    geo_mean = math.exp(log_sum / len(fractions))

    c_len = len(cand)
    r_len = min((len(r) for r in refs), key=lambda rl: (abs(rl - c_len), rl))
    bp = 1.0 if c_len > r_len else math.exp(1.0 - r_len / c_len)
    return bp * geo_mean


def gleu(
    source: str,
    candidate: str,
    references: Sequence[str],
    config: MetricConfig = DEFAULT_CONFIG,
    rng: random.Random | None = None,
) -> float:
    """Reference-sampled GLEU.

    Each round draws one reference uniformly and computes a single-reference
    score in which matched candidate n-grams are credited and candidate
    n-grams shared with the source but absent from the reference are
    subtracted from the numerator (floored at 0); the final score is the mean
    over rounds.  Zero statistics are smoothed to 1 so short sentences stay
    comparable.
    """
    _require_references(references)
    if rng is None:
        rng = derive_rng(config.gleu_seed, "gleu")
    src = source.split()
    cand = candidate.split()
    refs = [r.split() for r in references]

    per_ref: dict[int, float] = {}

    def score_against(j: int) -> float:
        ref = refs[j]
        stats: list[float] = [len(cand), len(ref)]
        for n in range(1, config.ngram_order + 1):
            cand_counts = _ngram_counts(cand, n)
            ref_counts = _ngram_counts(ref, n)
            src_counts = _ngram_counts(src, n)
            matched = sum(min(c, ref_counts[g]) for g, c in cand_counts.items() if g in ref_counts)
            penalty = sum(
                min(c, src_counts[g])
                for g, c in cand_counts.items()
                if g in src_counts and g not in ref_counts
            )
            stats.append(max(matched - penalty, 0))
            stats.append(max(len(cand) - n + 1, 0))
        stats = [s if s != 0 else 1 for s in stats]
        c_len, r_len = stats[0], stats[1]
        log_prec = sum(math.log(stats[i] / stats[i + 1]) for i in range(2, len(stats), 2))
        return math.exp(min(0.0, 1.0 - r_len / c_len) + log_prec / config.ngram_order)

    total = 0.0
    for _ in range(config.gleu_iterations):
        j = rng.randrange(len(refs))
        if j not in per_ref:
            per_ref[j] = score_against(j)
        total += per_ref[j]
    return total / config.gleu_iterations


def ibleu(
    source: str,
    candidate: str,
    references: Sequence[str],
    config: MetricConfig = DEFAULT_CONFIG,
) -> float:
    """alpha * BLEU(candidate, references) - (1 - alpha) * BLEU(candidate, source)."""
    a = config.ibleu_alpha
    return a * bleu(candidate, references, config) - (1.0 - a) * bleu(candidate, [source], config)


@lru_cache(maxsize=1 << 16)
def _extracted(source: tuple[str, ...], target: tuple[str, ...]) -> frozenset:
    return frozenset(
        (e.start, e.end, e.replacement.lower())
        for e in extract_edits(source, target)
    )


def f_half(source: str, candidate: str, references: Sequence[str]) -> float:
    """Edit-overlap F0.5 against the best reference.

    System and gold edits are auto-extracted from the (source, candidate) and
    (source, reference) pairs; an edit matches when span and lowercased
    replacement coincide.  No edits on either side scores 1, edits on exactly
    one side score 0.
    """
    _require_references(references)
    src = tuple(source.split())
    system = _extracted(src, tuple(candidate.split()))
    best = 0.0
    for reference in references:
        gold = _extracted(src, tuple(reference.split()))
        if not system and not gold:
            score = 1.0
        elif not system or not gold:
            score = 0.0
        else:
            matches = len(system & gold)
            p = matches / len(system)
            r = matches / len(gold)
            score = 1.25 * p * r / (0.25 * p + r) if matches else 0.0
        best = max(best, score)
    return best


def _f1(precision: float | None, recall: float | None) -> float:
    # None marks an undefined ratio (nothing attempted / nothing needed)
    if precision is None and recall is None:
        return 1.0
    if precision is None or recall is None:
        return 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _ratio_avg(good: Counter, attempted: Counter) -> float | None:
    if not attempted:
        return None
    return sum(good[g] / attempted[g] for g in attempted) / len(attempted)


def _scaled(counts: Counter, k: int) -> Counter:
    return Counter({g: c * k for g, c in counts.items()})


def sari(source: str, candidate: str, references: Sequence[str]) -> float:
    """Add/keep/delete n-gram score for monolingual rewriting.

    Per order n: an F1 over n-grams added to the source, an F1 over n-grams
    kept from it (reference counts weighted fractionally across the reference
    set), and a precision over deleted n-grams (a deletion counts as correct
    when the references also drop that n-gram).  Components are averaged over
    n = 1..4 and then equally weighted.  Vacuous cases (nothing to do and
    nothing done) count as perfect, so an exact single-reference match scores
    1; with several disagreeing references the fractional keep weights can
    hold the score below 1 even for a perfect correction.
    """
    _require_references(references)
    src = source.lower().split()
    cand = candidate.lower().split()
    refs = [r.lower().split() for r in references]
    k = len(refs)

    keep_scores, del_scores, add_scores = [], [], []
    for n in range(1, 5):
        s = _ngram_counts(src, n)
        c = _ngram_counts(cand, n)
        r_sum = Counter()
        for ref in refs:
            r_sum.update(_ngram_counts(ref, n))
        sk = _scaled(s, k)
        ck = _scaled(c, k)

        kept = sk & ck
        kept_good = kept & r_sum
        kept_all = sk & r_sum
        keep_scores.append(_f1(_ratio_avg(kept_good, kept), _ratio_avg(kept_good, kept_all)))

        deleted = sk - ck
        should_delete = sk - r_sum
        del_good = deleted & should_delete
        if not deleted:
            del_scores.append(1.0 if not should_delete else 0.0)
        else:
            del_scores.append(sum(del_good[g] / deleted[g] for g in deleted) / len(deleted))

        added = set(c) - set(s)
        add_all = set(r_sum) - set(s)
        add_good = added & set(r_sum)
        add_p = len(add_good) / len(added) if added else None
        add_r = len(add_good) / len(add_all) if add_all else None
        add_scores.append(_f1(add_p, add_r))

    order = len(keep_scores)
    return (sum(keep_scores) + sum(del_scores) + sum(add_scores)) / (3 * order)


def max_sari(source: str, candidate: str, references: Sequence[str]) -> float:
    """Best single-reference SARI; coincides with sari for one reference."""
    _require_references(references)
    return max(sari(source, candidate, [r]) for r in references)


def min_ld_to_refs(candidate: str, references: Sequence[str]) -> float:
    """Character similarity to the closest reference (normalized by the reference)."""
    _require_references(references)
    return max(lev_similarity(candidate, r) for r in references)


def ld_to_source(source: str, candidate: str) -> float:
    """Conservatism: character similarity of source and candidate, normalized by the candidate."""
    return lev_similarity(source, candidate)


def grammaticality(candidate: str, checker) -> float:
    """1 - errors/tokens per the supplied checker, floored at 0.

    An empty candidate scores 0 (no tokens to be grammatical).
    """
    n_tokens = len(candidate.split())
    if n_tokens == 0:
        return 0.0
    count = checker.check(candidate).error_count
    return max(0.0, 1.0 - count / n_tokens)


def score(
    metric_id: str,
    source: str,
    candidate: str,
    references: Sequence[str],
    config: MetricConfig = DEFAULT_CONFIG,
    checker=None,
    rng: random.Random | None = None,
) -> float:
    """Dispatch a single sentence score for any metric id."""
    if metric_id == "bleu":
        return bleu(candidate, references, config)
    if metric_id == "gleu":
        return gleu(source, candidate, references, config, rng)
    if metric_id == "ibleu":
        return ibleu(source, candidate, references, config)
    if metric_id == "sari":
        return sari(source, candidate, references)
    if metric_id == "max_sari":
        return max_sari(source, candidate, references)
    if metric_id == "f_half":
        return f_half(source, candidate, references)
    if metric_id == "min_ld_to_refs":
        return min_ld_to_refs(candidate, references)
    if metric_id == "ld_to_source":
        return ld_to_source(source, candidate)
    if metric_id == "grammaticality":
        if checker is None:
            raise ValueError("grammaticality requires a checker")
        return grammaticality(candidate, checker)
    raise ValueError(f"unknown metric {metric_id!r}")


def corpus_score(
    metric_id: str,
    inputs: Sequence[EvalInput],
    config: MetricConfig = DEFAULT_CONFIG,
    checker=None,
    seed: int = 0,
) -> float:
    """Average sentence score; the uniform corpus-level policy for all metrics."""
    if not inputs:
        raise ValueError("empty corpus")
    total = math.fsum(
        score(
            metric_id,
            item.source,
            item.candidate,
            item.references,
            config,
            checker=checker,
            rng=derive_rng(seed, item.sentence_id, "gleu"),
        )
        for item in inputs
    )
    return total / len(inputs)


def count_imeasure_refs(record: SentenceRecord) -> int:
    """Number of reference combinations under alternation semantics.

    Edits pooled over all annotations (deduplicated by span and replacement)
    are grouped into connected components of the span-overlap graph.  Each
    multi-edit component contributes a factor of its size (exactly one
    alternative is chosen); each non-overlapping edit that is not shared by
    every annotation doubles the count; edits shared by all annotations are
    mandatory.  Exact integer arithmetic.
    """
    all_annotators = {ann.annotator for ann in record.annotations}
    pooled: dict[tuple[int, int, str], set[str]] = {}
    edits = {}
    for ann in record.annotations:
        for e in ann.edits:
            key = (e.start, e.end, e.replacement)
            pooled.setdefault(key, set()).add(ann.annotator)
            edits.setdefault(key, e)

    keys = sorted(pooled)
    n = len(keys)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if edits_overlap(edits[keys[i]], edits[keys[j]]):
                parent[find(i)] = find(j)

    components: dict[int, list[int]] = {}
    for i in range(n):
        components.setdefault(find(i), []).append(i)

    count = 1
    for members in components.values():
        if len(members) > 1:
            count *= len(members)
        else:
            (i,) = members
            if pooled[keys[i]] != all_annotators:
                count *= 2
    return count
