"""Experiment drivers: corpus-level, sentence-level, and per-error-type
analyses over correction lattices, plus report emission.

All randomness is pre-derived per (seed, sentence, purpose) stream before any
scoring fans out to the worker pool, and reductions run in a fixed order, so
reports are byte-identical for any worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .corpus import Corpus, SentenceRecord
from .grammar import CheckResult, OfflineChecker
from .lattice import (
    Chain,
    CorrectionLattice,
    CorpusModel,
    _single_edit_scan,
    chain_log_rows,
    comparable_pairs,
    correction_log_rows,
    quality_score,
    sample_chains,
    sample_model_corpus,
    sample_source_corpus,
    write_node_log,
)
from .metrics import DEFAULT_CONFIG, METRIC_IDS, MetricConfig, grammaticality, score
from .seeds import derive_rng, derive_seed
from .stats import ConstantInputError, CorrelationReport, kendall_tau_partial, pearson, spearman

ORACLE_METRICS = ("oracle", "anti_oracle")
DEFAULT_MODELS = tuple(float(m) for m in range(11))
PROFILE_MIN_BUCKET = 3


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    metrics: tuple[str, ...] = METRIC_IDS
    models: tuple[float, ...] = DEFAULT_MODELS
    n_chains: int = 1
    source_mode: str = "sampled"  # or "original"
    repeats: int = 1
    held_out_refs: bool = False
    workers: int = 1
    metric_config: MetricConfig = field(default_factory=MetricConfig)

    def __post_init__(self):
        if not self.metrics:
            raise ValueError("metric list must not be empty")
        if not self.models:
            raise ValueError("model list must not be empty")
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if self.source_mode not in ("sampled", "original"):
            raise ValueError(f"unknown source mode {self.source_mode!r}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        unknown = [m for m in self.metrics if m not in METRIC_IDS + ORACLE_METRICS]
        if unknown:
            raise ValueError(f"unknown metrics: {', '.join(unknown)}")


@dataclass(frozen=True)
class ScoreTask:
    sentence_id: str
    source: str
    candidate: str
    references: tuple[str, ...]
    quality: float


class _PrefetchedChecker:
    """Checker facade over counts fetched up front in the main thread."""

    def __init__(self, counts: dict[str, int]):
        self._counts = counts

    def check(self, text: str) -> CheckResult:
        return CheckResult(self._counts[text])


def _prefetch_error_counts(tasks: Sequence[ScoreTask], checker) -> dict[str, int]:
    texts = sorted({t.candidate for t in tasks})
    return {text: checker.check(text).error_count for text in texts}


def _score_tasks(
    tasks: Sequence[ScoreTask],
    config: ExperimentConfig,
    checker,
) -> list[dict[str, float]]:
    """Score every task under every configured metric, in task order."""
    needs_grammar = "grammaticality" in config.metrics
    counts = _prefetch_error_counts(tasks, checker or OfflineChecker()) if needs_grammar else {}
    local = _PrefetchedChecker(counts)

    def one(task: ScoreTask) -> dict[str, float]:
        out: dict[str, float] = {}
        for metric_id in config.metrics:
            if metric_id == "oracle":
                out[metric_id] = task.quality
            elif metric_id == "anti_oracle":
                out[metric_id] = -task.quality
            elif metric_id == "grammaticality":
                out[metric_id] = grammaticality(task.candidate, local)
            else:
                out[metric_id] = score(
                    metric_id,
                    task.source,
                    task.candidate,
                    task.references,
                    config.metric_config,
                    rng=derive_rng(config.seed, task.sentence_id, "gleu"),
                )
        return out

    if config.workers <= 1:
        return [one(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(one, tasks))


def _references_for(record: SentenceRecord, annotator: str, held_out: bool) -> tuple[str, ...]:
    if not held_out:
        return record.references
    kept = tuple(
        ref for ref, origin in zip(record.references, record.ref_origins) if origin != annotator
    )
    return kept or record.references


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def run_corpus_level(corpus: Corpus, config: ExperimentConfig, checker=None) -> dict:
    """Rank synthetic system corpora of increasing expected edit counts.

    One shared source corpus is sampled (or fixed to the originals); each
    model contributes one correction per sentence; corpus scores are mean
    sentence scores, and each metric's ranking is correlated (Spearman)
    against the model order.
    """
    if not len(corpus.records):
        raise ValueError("empty corpus")
    records = list(corpus)
    if config.source_mode == "original":
        source_texts = [r.text for r in records]
        source_log = [(r.sentence_id, "-", "source original", 0, r.text) for r in records]
    else:
        sources = sample_source_corpus(corpus, config.seed, purpose="corpus/source")
        source_texts = [s.text for s in sources]
        source_log = correction_log_rows(sources, tag="source")

    per_model_scores: dict[str, list[float]] = {m: [] for m in config.metrics}
    model_logs: list[tuple] = []
    for model_value in config.models:
        repeat_scores: dict[str, list[float]] = {m: [] for m in config.metrics}
        for repeat in range(config.repeats):
            candidates = sample_model_corpus(
                corpus,
                CorpusModel(model_value),
                config.seed,
                purpose=f"corpus/model/{model_value}/{repeat}",
            )
            if repeat == 0:
                model_logs.extend(correction_log_rows(candidates, tag=f"model={model_value}"))
            tasks = []
            for record, src_text, cand in zip(records, source_texts, candidates):
                refs = _references_for(record, cand.lattice.annotator, config.held_out_refs)
                tasks.append(
                    ScoreTask(record.sentence_id, src_text, cand.text, refs, quality_score(cand, record))
                )
            rows = _score_tasks(tasks, config, checker)
            for metric_id in config.metrics:
                repeat_scores[metric_id].append(_mean([r[metric_id] for r in rows]))
        for metric_id in config.metrics:
            per_model_scores[metric_id].append(_mean(repeat_scores[metric_id]))

    reports: dict[str, CorrelationReport] = {}
    for metric_id in config.metrics:
        reports[metric_id] = spearman(list(config.models), per_model_scores[metric_id])

    return {
        "models": list(config.models),
        "per_model_scores": per_model_scores,
        "spearman": {m: r.as_dict() for m, r in reports.items()},
        "_reports": reports,
        "_source_log": source_log,
        "_model_log": model_logs,
    }


def _lattice_chains(corpus: Corpus, config: ExperimentConfig, purpose: str) -> list[Chain]:
    """Chains for every (sentence, annotation) lattice.

    The permutation and source draws are identical in both source modes; the
    original mode only pins the effective source to the chain bottom.
    """
    chains: list[Chain] = []
    for record in corpus:
        for ann in record.annotations:
            lattice = CorrectionLattice.from_record(record, ann.annotator)
            rng = derive_rng(config.seed, record.sentence_id, ann.annotator, purpose)
            sampled = sample_chains(lattice, config.n_chains, rng)
            if config.source_mode == "original":
                sampled = [replace(c, source_index=0) for c in sampled]
            chains.extend(sampled)
    return chains


def _unique_nodes(chains: Sequence[Chain]) -> dict[tuple[str, str], dict[int, int]]:
    """Per lattice key: mask -> index (into ``chains``) of the earliest chain holding it."""
    nodes: dict[tuple[str, str], dict[int, int]] = {}
    for idx, chain in enumerate(chains):
        per = nodes.setdefault(chain.lattice.key(), {})
        for mask in chain.masks():
            per.setdefault(mask, idx)
    return nodes


def run_sentence_level(corpus: Corpus, config: ExperimentConfig, checker=None) -> dict:
    """Correlate metric scores with the lattice quality score and partial order.

    Chains are sampled per (sentence, annotation); every distinct sampled node
    is scored once against the source of the earliest chain containing it
    (or the original in original-source mode).  Pearson runs over node scores
    against quality; the partial-order Kendall tau runs over all comparable
    sampled pairs.
    """
    records = {r.sentence_id: r for r in corpus}
    chains = _lattice_chains(corpus, config, purpose="sentence/chains")
    nodes = _unique_nodes(chains)

    tasks: list[ScoreTask] = []
    task_index: dict[tuple[str, str, int], int] = {}
    node_lists: dict[tuple[str, str], list] = {}
    for chain_key, masks in nodes.items():
        sid, annotator = chain_key
        record = records[sid]
        refs = _references_for(record, annotator, config.held_out_refs)
        lattice = chains[min(masks.values())].lattice
        node_lists[chain_key] = [lattice.node(m) for m in sorted(masks)]
        for mask in sorted(masks):
            chain = chains[masks[mask]]
            node = lattice.node(mask)
            task_index[(sid, annotator, mask)] = len(tasks)
            tasks.append(
                ScoreTask(sid, chain.source.text, node.text, refs, quality_score(node, record))
            )

    rows = _score_tasks(tasks, config, checker)

    qualities = [t.quality for t in tasks]
    out_pearson: dict[str, dict | None] = {}
    pearson_errors: dict[str, str] = {}
    out_kendall: dict[str, dict] = {}
    reports: dict[str, dict] = {}
    for metric_id in config.metrics:
        values = [row[metric_id] for row in rows]
        try:
            p_report = pearson(qualities, values)
            out_pearson[metric_id] = p_report.as_dict()
        except ConstantInputError as exc:
            out_pearson[metric_id] = None
            pearson_errors[metric_id] = str(exc)
            p_report = None

        judged: list[tuple[float, float]] = []
        for chain_key, node_list in node_lists.items():
            sid, annotator = chain_key
            for lower, higher in comparable_pairs(node_list):
                lo = values[task_index[(sid, annotator, lower.mask)]]
                hi = values[task_index[(sid, annotator, higher.mask)]]
                judged.append((lo, hi))
        k_report = kendall_tau_partial(
            judged,
            seed=derive_seed(config.seed, "sentence/kendall", metric_id),
        )
        out_kendall[metric_id] = k_report.as_dict()
        reports[metric_id] = {"pearson": p_report, "kendall": k_report}

    profile = _error_count_profile(corpus, config, rows, task_index)
    return {
        "pearson": out_pearson,
        "pearson_errors": pearson_errors,
        "kendall": out_kendall,
        "error_profile": profile,
        "n_nodes": len(tasks),
        "_reports": reports,
        "_chain_log": chain_log_rows(chains),
    }


def _error_count_profile(corpus, config, rows, task_index) -> list[dict]:
    """Mean original-sentence score per error count (buckets under 3 suppressed)."""
    buckets: dict[int, list[dict[str, float]]] = {}
    for record in corpus:
        n_errors = min(len(ann.edits) for ann in record.annotations)
        first = min(ann.annotator for ann in record.annotations)
        idx = task_index.get((record.sentence_id, first, 0))
        if idx is None:
            continue
        buckets.setdefault(n_errors, []).append(rows[idx])
    profile = []
    for n_errors in sorted(buckets):
        group = buckets[n_errors]
        if len(group) < PROFILE_MIN_BUCKET:
            continue
        profile.append(
            {
                "error_count": n_errors,
                "n_sentences": len(group),
                "mean_scores": {m: _mean([g[m] for g in group]) for m in config.metrics},
            }
        )
    return profile


def run_type_sensitivity(corpus: Corpus, config: ExperimentConfig, checker=None) -> dict:
    """Mean score change caused by single edits, split by error type.

    Pairs of sampled nodes differing in exactly one edit are pooled per
    lattice; both sides are scored against the source of the earliest chain
    containing the smaller node.  A positive cell means the metric rewards
    valid corrections of that type.
    """
    records = {r.sentence_id: r for r in corpus}
    chains = _lattice_chains(corpus, config, purpose="typesens/chains")

    pair_specs: list[tuple[str, int, int]] = []  # (etype, lower task idx, higher task idx)
    tasks: list[ScoreTask] = []
    task_index: dict[tuple[str, str, int, str], int] = {}

    def task_for(lattice: CorrectionLattice, mask: int, src_text: str, record: SentenceRecord) -> int:
        key = (lattice.sentence_id, lattice.annotator, mask, src_text)
        if key not in task_index:
            refs = _references_for(record, lattice.annotator, config.held_out_refs)
            node = lattice.node(mask)
            task_index[key] = len(tasks)
            tasks.append(
                ScoreTask(lattice.sentence_id, src_text, node.text, refs, quality_score(node, record))
            )
        return task_index[key]

    for lattice, lower_mask, higher_mask, chain_idx in _single_edit_scan(chains):
        record = records[lattice.sentence_id]
        src_text = chains[chain_idx].source.text
        etype = lattice.edits[(lower_mask ^ higher_mask).bit_length() - 1].etype
        lo = task_for(lattice, lower_mask, src_text, record)
        hi = task_for(lattice, higher_mask, src_text, record)
        pair_specs.append((etype, lo, hi))

    rows = _score_tasks(tasks, config, checker)

    by_type: dict[str, list[tuple[int, int]]] = {}
    for etype, lo, hi in pair_specs:
        by_type.setdefault(etype, []).append((lo, hi))

    delta: dict[str, dict[str, float]] = {m: {} for m in config.metrics}
    counts: dict[str, int] = {}
    for etype in sorted(by_type):
        pairs = by_type[etype]
        counts[etype] = len(pairs)
        for metric_id in config.metrics:
            delta[metric_id][etype] = _mean(
                [rows[hi][metric_id] - rows[lo][metric_id] for lo, hi in pairs]
            )

    return {
        "delta": delta,
        "pair_counts": counts,
        "types": sorted(by_type),
        "_chain_log": chain_log_rows(chains),
    }


def run_full(corpus: Corpus, config: ExperimentConfig, checker=None) -> dict:
    """All three analyses at the configured source mode."""
    return {
        "source_mode": config.source_mode,
        "corpus_level": run_corpus_level(corpus, config, checker),
        "sentence_level": run_sentence_level(corpus, config, checker),
        "type_sensitivity": run_type_sensitivity(corpus, config, checker),
    }


def run_precision_oriented(corpus: Corpus, config: ExperimentConfig, checker=None) -> dict:
    """Paired runs: source fixed to the original vs the regular sampled source.

    The chain and model samples are shared between the two runs (identical
    purpose streams); only source selection differs.
    """
    original = run_full(corpus, replace(config, source_mode="original"), checker)
    sampled = run_full(corpus, replace(config, source_mode="sampled"), checker)
    return {"paired": True, "original": original, "sampled": sampled}


def _strip_private(obj):
    if isinstance(obj, dict):
        return {k: _strip_private(v) for k, v in obj.items() if not k.startswith("_")}
    if isinstance(obj, list):
        return [_strip_private(v) for v in obj]
    return obj


def build_manifest(config: ExperimentConfig, checker=None, input_digests: dict | None = None) -> dict:
    return {
        "tool": {"name": "gecvalid", "version": __version__},
        "config": {
            "seed": config.seed,
            "metrics": list(config.metrics),
            "models": list(config.models),
            "n_ch": config.n_chains,
            "source_mode": config.source_mode,
            "repeats": config.repeats,
            "held_out_refs": config.held_out_refs,
            "metric_config": {
                "ngram_order": config.metric_config.ngram_order,
                "bleu_smoothing": config.metric_config.bleu_smoothing,
                "ibleu_alpha": config.metric_config.ibleu_alpha,
                "gleu_iterations": config.metric_config.gleu_iterations,
                "gleu_seed": config.metric_config.gleu_seed,
            },
        },
        "checker": checker.describe() if hasattr(checker, "describe") else {"mode": "offline"},
        "inputs": input_digests or {},
        "conventions": {
            "kendall_ties": "metric ties on comparable pairs count 0.5 toward discongruence",
            "pair_source": "earliest sampled chain containing the smaller node supplies the source",
            "node_scoring": "each distinct lattice node is scored once per analysis",
            "corpus_score": "mean sentence score for every metric",
        },
    }


def _fmt(x) -> str:
    if x is None:
        return "NA"
    return f"{x:.3f}"


def _correlations_tsv(results: dict, metrics: Sequence[str]) -> str:
    columns = ["metric"]
    rows: dict[str, list[str]] = {m: [m] for m in metrics}

    def add_mode(label: str, block: dict):
        corpus = block.get("corpus_level")
        sentence = block.get("sentence_level")
        if corpus:
            columns.extend([f"{label}rho", f"{label}rho_p"])
            for m in metrics:
                rep = corpus["spearman"][m]
                rows[m].extend([_fmt(rep["coefficient"]), _fmt(rep["p_value"])])
        if sentence:
            columns.extend([f"{label}r", f"{label}r_p", f"{label}tau", f"{label}tau_p"])
            for m in metrics:
                p = sentence["pearson"][m]
                k = sentence["kendall"][m]
                rows[m].extend(
                    [
                        _fmt(p["coefficient"] if p else None),
                        _fmt(p["p_value"] if p else None),
                        _fmt(k["coefficient"]),
                        _fmt(k["p_value"]),
                    ]
                )

    if results.get("paired"):
        add_mode("original_", results["original"])
        add_mode("sampled_", results["sampled"])
    else:
        add_mode("", results)
    lines = ["\t".join(columns)]
    lines.extend("\t".join(rows[m]) for m in metrics)
    return "\n".join(lines) + "\n"


def _type_sensitivity_tsv(block: dict, metrics: Sequence[str]) -> str:
    types = block["types"]
    lines = ["\t".join(["type", "pairs"] + list(metrics))]
    for etype in types:
        cells = [etype, str(block["pair_counts"][etype])]
        for m in metrics:
            cells.append(_fmt(block["delta"][m].get(etype)))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def _error_profile_tsv(profile: list[dict], metrics: Sequence[str]) -> str:
    lines = ["\t".join(["error_count", "n_sentences"] + list(metrics))]
    for row in profile:
        cells = [str(row["error_count"]), str(row["n_sentences"])]
        cells.extend(_fmt(row["mean_scores"][m]) for m in metrics)
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def emit_report(
    results: dict,
    config: ExperimentConfig,
    out_dir,
    report_format: str = "tsv",
    checker=None,
    input_digests: dict | None = None,
) -> list[Path]:
    """Write the structured report, the TSV tables, sample logs, and manifest.

    The JSON report keeps full float precision; TSV cells are rendered to 3
    decimals with NA for absent cells.
    """
    if report_format not in ("tsv", "json"):
        raise ValueError(f"unknown report format {report_format!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    manifest = build_manifest(config, checker, input_digests)
    written.append(_write(out / "manifest.json", _dump_json(manifest)))
    written.append(_write(out / "report.json", _dump_json(_strip_private(results))))

    if results.get("paired"):
        labelled = [("original_", results["original"]), ("sampled_", results["sampled"])]
    else:
        labelled = [("", results)]

    if report_format == "tsv":
        if any("corpus_level" in b or "sentence_level" in b for _, b in labelled):
            written.append(_write(out / "correlations.tsv", _correlations_tsv(results, config.metrics)))
        for prefix, block in labelled:
            if "type_sensitivity" in block:
                written.append(
                    _write(
                        out / f"{prefix}type_sensitivity.tsv",
                        _type_sensitivity_tsv(block["type_sensitivity"], config.metrics),
                    )
                )
            if "sentence_level" in block and block["sentence_level"].get("error_profile"):
                written.append(
                    _write(
                        out / f"{prefix}error_profile.tsv",
                        _error_profile_tsv(block["sentence_level"]["error_profile"], config.metrics),
                    )
                )

    for prefix, block in labelled:
        cl = block.get("corpus_level")
        if cl:
            path = out / f"{prefix}corpus_samples.log"
            with open(path, "w", encoding="utf-8") as fh:
                write_node_log(
                    fh,
                    {"seed": config.seed, "models": ",".join(str(m) for m in config.models), "purpose": "corpus-level"},
                    cl["_source_log"] + cl["_model_log"],
                )
            written.append(path)
        for key, name in (("sentence_level", "chains"), ("type_sensitivity", "typesens_chains")):
            blk = block.get(key)
            if blk and "_chain_log" in blk:
                path = out / f"{prefix}{name}.log"
                with open(path, "w", encoding="utf-8") as fh:
                    write_node_log(
                        fh,
                        {
                            "seed": config.seed,
                            "n_ch": config.n_chains,
                            "source_mode": block.get("source_mode", config.source_mode),
                        },
                        blk["_chain_log"],
                    )
                written.append(path)
    return written


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _write(path: Path, text: str) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path
