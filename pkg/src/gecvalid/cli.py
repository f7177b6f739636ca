"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 external-service error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from collections import Counter
from pathlib import Path

from . import __version__
from .analysis import (
    ORACLE_METRICS,
    ExperimentConfig,
    emit_report,
    run_corpus_level,
    run_full,
    run_precision_oriented,
    run_sentence_level,
    run_type_sensitivity,
)
from .corpus import Corpus, M2ParseError, attach_references, load_m2
from .grammar import ENDPOINT_ENV_VAR, CheckerError, make_checker
from .metrics import METRIC_IDS, MetricConfig, count_imeasure_refs

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SERVICE = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(parser: argparse.ArgumentParser, needs_out: bool = True) -> None:
    parser.add_argument("--m2", required=True, help="gold M2 file")
    parser.add_argument("--refs", nargs="*", default=[], help="extra reference files, one sentence per line")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--metrics",
        default=",".join(METRIC_IDS),
        help=f"comma-separated subset of: {', '.join(METRIC_IDS + ORACLE_METRICS)}",
    )
    parser.add_argument("--models", default="0,1,2,3,4,5,6,7,8,9,10", help="comma-separated expected edit counts")
    parser.add_argument("--n-ch", type=int, default=1, dest="n_ch", help="chains sampled per lattice")
    parser.add_argument("--source-mode", choices=["sampled", "original"], default="sampled")
    parser.add_argument("--grammar-endpoint", default=None, help=f"checker URL (or ${ENDPOINT_ENV_VAR})")
    parser.add_argument("--offline-grammar", action="store_true", help="use the bundled offline rules")
    parser.add_argument("--repeats", type=int, default=1, help="model-corpus resamplings to average")
    parser.add_argument("--held-out-refs", action="store_true", help="exclude the lattice annotation's own reference")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--gleu-iterations", type=int, default=500)
    if needs_out:
        parser.add_argument("--out", required=True, help="output directory")
        parser.add_argument("--format", choices=["tsv", "json"], default="tsv")


def build_parser() -> _Parser:
    parser = _Parser(prog="gecvalid", description=__doc__)
    parser.add_argument("--version", action="version", version=f"gecvalid {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and validate a corpus, print statistics")
    p.add_argument("--m2", required=True)
    p.add_argument("--refs", nargs="*", default=[])
    p.add_argument("--intersection-policy", choices=["merge", "reject"], default="merge")

    for name, doc in (
        ("corpus-eval", "corpus-level model ranking analysis"),
        ("sentence-eval", "sentence-level chain analysis"),
        ("type-sensitivity", "per-error-type score deltas"),
        ("full", "all analyses (original source mode runs paired against sampled)"),
    ):
        p = sub.add_parser(name, help=doc)
        _add_common(p)

    p = sub.add_parser("count-imeasure", help="per-sentence reference combination counts")
    p.add_argument("--m2", required=True)
    p.add_argument("--out", default=None, help="optional TSV path (default stdout)")
    return parser


def _load_corpus(args) -> tuple[Corpus, dict]:
    corpus = load_m2(args.m2, getattr(args, "intersection_policy", "merge"))
    digests = {"m2_sha256": _sha256(args.m2)}
    for i, path in enumerate(getattr(args, "refs", [])):
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        corpus = attach_references(corpus, lines)
        digests[f"refs_{i}_sha256"] = _sha256(path)
    return corpus, digests


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _make_config(args) -> ExperimentConfig:
    metrics = tuple(m.strip() for m in args.metrics.split(",") if m.strip())
    try:
        models = tuple(float(m) for m in args.models.split(",") if m.strip())
    except ValueError as exc:
        raise UsageError(f"bad --models value: {exc}") from None
    try:
        return ExperimentConfig(
            seed=args.seed,
            metrics=metrics,
            models=models,
            n_chains=args.n_ch,
            source_mode=args.source_mode,
            repeats=args.repeats,
            held_out_refs=args.held_out_refs,
            workers=args.workers,
            metric_config=MetricConfig(gleu_iterations=args.gleu_iterations, gleu_seed=args.seed),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _make_checker(args):
    url = args.grammar_endpoint or os.environ.get(ENDPOINT_ENV_VAR)
    return make_checker(url, offline=args.offline_grammar or not url)


def _cmd_ingest(args) -> int:
    corpus, digests = _load_corpus(args)
    types = Counter(e.etype for rec in corpus for ann in rec.annotations for e in ann.edits)
    stats = {
        "records": len(corpus),
        "provenance": corpus.provenance,
        "annotators": corpus.provenance.get("annotators", []),
        "references_per_record": len(corpus.records[0].references) if len(corpus) else 0,
        "edit_types": dict(sorted(types.items())),
        "edits_total": sum(types.values()),
        "inputs": digests,
    }
    print(json.dumps(stats, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_count_imeasure(args) -> int:
    corpus = load_m2(args.m2)
    lines = ["sentence_id\tcombinations"]
    counts = []
    for record in corpus:
        n = count_imeasure_refs(record)
        counts.append(n)
        lines.append(f"{record.sentence_id}\t{n}")
    counts.sort()
    median = counts[len(counts) // 2] if counts else 0
    lines.append(f"# records={len(counts)} median={median}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


_ANALYSIS_RUNNERS = {
    "corpus-eval": lambda corpus, cfg, checker: {"source_mode": cfg.source_mode, "corpus_level": run_corpus_level(corpus, cfg, checker)},
    "sentence-eval": lambda corpus, cfg, checker: {"source_mode": cfg.source_mode, "sentence_level": run_sentence_level(corpus, cfg, checker)},
    "type-sensitivity": lambda corpus, cfg, checker: {"source_mode": cfg.source_mode, "type_sensitivity": run_type_sensitivity(corpus, cfg, checker)},
}


def _cmd_analysis(args) -> int:
    corpus, digests = _load_corpus(args)
    if not len(corpus):
        raise M2ParseError(0, "no records survived loading; nothing to analyse")
    config = _make_config(args)
    checker = _make_checker(args)
    if args.command == "full":
        if config.source_mode == "original":
            results = run_precision_oriented(corpus, config, checker)
        else:
            results = run_full(corpus, config, checker)
    else:
        results = _ANALYSIS_RUNNERS[args.command](corpus, config, checker)
    written = emit_report(results, config, args.out, args.format, checker, digests)
    for path in written:
        print(path)
    return EXIT_OK


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "ingest":
            return _cmd_ingest(args)
        if args.command == "count-imeasure":
            return _cmd_count_imeasure(args)
        return _cmd_analysis(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckerError as exc:
        print(f"grammar checker error: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except (OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
