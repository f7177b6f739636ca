"""Gold-annotated corpora: M2 parsing and deterministic edit application.

The M2 format is block oriented.  Each block carries one tokenised sentence
("S" line) and zero or more edit lines of the form

    A <start> <end>|||<type>|||<replacement>|||<required>|||<comment>|||<annotator>

Token spans index the S-line tokens, end-exclusive.  A "noop" edit (type
``noop`` or span ``-1 -1``) marks an annotator who proposed no changes;
sentences with such an annotator, or with an annotator that appears elsewhere
in the file but not in the block, are dropped at load time because every
retained record must carry at least one edit per annotation.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

# Error-type labels used by the NUCLE annotation scheme.  Parsing does not
# enforce membership; the list backs ingest statistics and fixtures.
NUCLE_ERROR_TYPES = (
    "ArtOrDet", "Mec", "Nn", "Npos", "Others", "Pform", "Pref", "Prep",
    "Rloc-", "SVA", "Sfrag", "Smod", "Spar", "Srun", "Ssub", "Trans",
    "Um", "V0", "Vform", "Vm", "Vt", "WOadv", "WOinc", "Wa", "Wci",
    "Wform", "Wtone",
)


class M2ParseError(ValueError):
    """Malformed M2 input. Carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class OverlapError(ValueError):
    """Edits that illegally overlap; lists the offending pairs."""

    def __init__(self, pairs: list[tuple["Edit", "Edit"]], context: str = ""):
        self.pairs = pairs
        shown = "; ".join(f"{a.start}-{a.end} vs {b.start}-{b.end}" for a, b in pairs)
        prefix = f"{context}: " if context else ""
        super().__init__(f"{prefix}overlapping edits: {shown}")


class SpanError(ValueError):
    """Edit span outside the sentence it is applied to."""


@dataclass(frozen=True)
class Edit:
    """A typed replacement of a contiguous token span.

    ``start == end`` is a pure insertion; an empty ``replacement`` is a pure
    deletion.  Both at once would be a no-op and is rejected.
    """

    start: int
    end: int
    replacement: str
    etype: str
    annotator: str = "0"

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"bad span ({self.start}, {self.end})")
        if self.start == self.end and not self.replacement:
            raise ValueError(f"no-op edit at position {self.start}")

    @property
    def replacement_tokens(self) -> list[str]:
        return self.replacement.split()

    @property
    def is_insertion(self) -> bool:
        return self.start == self.end


def edits_overlap(a: Edit, b: Edit) -> bool:
    """True when the two edits cannot be applied together.

    Half-open spans conflict when they intersect; two insertions at the same
    position also conflict (they compete for one slot).  An insertion at the
    boundary of a span does not.
    """
    lo, hi = (a, b) if (a.start, a.end) <= (b.start, b.end) else (b, a)
    if lo.start == lo.end == hi.start == hi.end:
        return True
    return lo.end > hi.start


@dataclass(frozen=True)
class Annotation:
    """One annotator's edit set for a sentence, sorted by span."""

    annotator: str
    edits: tuple[Edit, ...]

    @staticmethod
    def make(annotator: str, edits: Iterable[Edit]) -> "Annotation":
        ordered = tuple(sorted(edits, key=lambda e: (e.start, e.end, e.replacement, e.etype)))
        return Annotation(annotator, ordered)

    def overlapping_pairs(self) -> list[tuple[Edit, Edit]]:
        return [
            (a, b)
            for i, a in enumerate(self.edits)
            for b in self.edits[i + 1:]
            if edits_overlap(a, b)
        ]


@dataclass(frozen=True)
class SentenceRecord:
    """Original tokens plus gold annotations and reference strings.

    ``ref_origins`` is aligned with ``references``: the annotator id for
    references realized from an annotation, None for externally supplied ones.
    """

    sentence_id: str
    tokens: tuple[str, ...]
    annotations: tuple[Annotation, ...]
    references: tuple[str, ...] = ()
    ref_origins: tuple[str | None, ...] = ()

    def annotation(self, annotator: str) -> Annotation:
        for ann in self.annotations:
            if ann.annotator == annotator:
                return ann
        raise KeyError(f"sentence {self.sentence_id}: no annotation {annotator!r}")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass
class Corpus:
    records: list[SentenceRecord]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [r.sentence_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate sentence ids")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def apply_edits(tokens: Sequence[str], edits: Iterable[Edit]) -> list[str]:
    """Replace every edit's span with its replacement tokens.

    Edits must be pairwise non-overlapping and inside the sentence; the result
    does not depend on iteration order (spans are rewritten from the right so
    earlier offsets stay valid).
    """
    ordered = sorted(edits, key=lambda e: (e.start, e.end))
    for i in range(1, len(ordered)):
        if edits_overlap(ordered[i - 1], ordered[i]):
            raise OverlapError([(ordered[i - 1], ordered[i])], "apply_edits")
    out = list(tokens)
    for e in reversed(ordered):
        if e.end > len(tokens):
            raise SpanError(f"edit span ({e.start}, {e.end}) exceeds sentence length {len(tokens)}")
        out[e.start:e.end] = e.replacement_tokens
    return out


def realize_reference(record: SentenceRecord, annotator: str) -> str:
    """The perfect correction reached by applying an annotation in full."""
    ann = record.annotation(annotator)
    return " ".join(apply_edits(record.tokens, ann.edits))


def resolve_intersections(annotation: Annotation, policy: str = "merge") -> Annotation:
    """Normalize an annotation that may contain overlapping edits.

    Under ``merge``, each maximal group of transitively overlapping edits
    collapses into one edit over the union span.  The merged replacement is
    built left to right with first-writer-wins on contested tokens; the merged
    type is the lexicographically smallest in the group.  Under ``reject`` any
    overlap raises.
    """
    if policy not in ("merge", "reject"):
        raise ValueError(f"unknown policy {policy!r}")
    pairs = annotation.overlapping_pairs()
    if not pairs:
        return annotation
    if policy == "reject":
        raise OverlapError(pairs, f"annotation {annotation.annotator!r}")

    groups = _overlap_groups(annotation.edits)
    merged: list[Edit] = []
    for group in groups:
        if len(group) == 1:
            merged.append(group[0])
        else:
            merged.append(_merge_group(group))
    return Annotation.make(annotation.annotator, merged)


def _overlap_groups(edits: Sequence[Edit]) -> list[list[Edit]]:
    """Connected components of the overlap graph, in span order."""
    nodes = sorted(edits, key=lambda e: (e.start, e.end, e.replacement, e.etype))
    n = len(nodes)
    component = list(range(n))

    def find(i: int) -> int:
        while component[i] != i:
            component[i] = component[component[i]]
            i = component[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if edits_overlap(nodes[i], nodes[j]):
                component[find(i)] = find(j)

    grouped: dict[int, list[Edit]] = {}
    for i, e in enumerate(nodes):
        grouped.setdefault(find(i), []).append(e)
    groups = list(grouped.values())
    groups.sort(key=lambda g: (g[0].start, g[0].end))
    return groups


def _merge_group(group: list[Edit]) -> Edit:
    ordered = sorted(group, key=lambda e: (e.start, e.end, e.replacement, e.etype))
    start = min(e.start for e in ordered)
    end = max(e.end for e in ordered)
    out_tokens: list[str] = []
    cursor = start
    claimed_insertions: set[int] = set()
    for e in ordered:
        if e.is_insertion:
            if e.start < cursor or e.start in claimed_insertions:
                continue
            out_tokens.extend(e.replacement_tokens)
            claimed_insertions.add(e.start)
        else:
            if e.end <= cursor:
                continue
            out_tokens.extend(e.replacement_tokens)
            cursor = e.end
    etype = min(e.etype for e in ordered)
    annotator = ordered[0].annotator
    return Edit(start, end, " ".join(out_tokens), etype, annotator)


def parse_m2(source: str | io.TextIOBase, intersection_policy: str = "merge") -> Corpus:
    """Parse M2 text into a Corpus.

    Records where any annotator (from the file-wide annotator set) has no
    edits are discarded.  Overlapping edits within one annotation are handled
    per ``intersection_policy``.  Malformed lines raise M2ParseError with the
    line number.
    """
    text = source.read() if hasattr(source, "read") else source
    blocks = _split_blocks(text)

    parsed = []
    for block in blocks:
        parsed.append(_parse_block(block))

    universe: set[str] = set()
    for _, _, by_annotator, noop in parsed:
        universe |= set(by_annotator) | noop
    if not universe:
        universe = {"0"}

    records: list[SentenceRecord] = []
    discarded = 0
    merged_annotations = 0
    for idx, (line_no, tokens, by_annotator, noop_annotators) in enumerate(parsed):
        for aid, edits in by_annotator.items():
            for e in edits:
                if e.end > len(tokens):
                    raise M2ParseError(line_no, f"edit span ({e.start}, {e.end}) exceeds sentence length {len(tokens)}")
        if any(aid not in by_annotator or not by_annotator[aid] for aid in universe):
            discarded += 1
            continue
        annotations = []
        for aid in sorted(universe):
            ann = Annotation.make(aid, by_annotator[aid])
            resolved = resolve_intersections(ann, intersection_policy)
            if resolved is not ann:
                merged_annotations += 1
            annotations.append(resolved)
        record = SentenceRecord(str(idx), tokens, tuple(annotations))
        references = tuple(realize_reference(record, ann.annotator) for ann in annotations)
        origins = tuple(ann.annotator for ann in annotations)
        records.append(replace(record, references=references, ref_origins=origins))

    return Corpus(
        records,
        provenance={
            "blocks": len(parsed),
            "discarded": discarded,
            "annotators": sorted(universe),
            "merged_annotations": merged_annotations,
        },
    )


def _split_blocks(text: str) -> list[list[tuple[int, str]]]:
    blocks: list[list[tuple[int, str]]] = []
    current: list[tuple[int, str]] = []
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if line.strip():
            current.append((line_no, line))
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    return blocks


def _parse_block(block: list[tuple[int, str]]):
    line_no, first = block[0]
    if not first.startswith("S ") and first != "S":
        raise M2ParseError(line_no, f"block must start with an S line, got {first[:20]!r}")
    tokens = tuple(first[2:].split())

    by_annotator: dict[str, list[Edit]] = {}
    noop_annotators: set[str] = set()
    for ln, line in block[1:]:
        if line.startswith("S "):
            raise M2ParseError(ln, "unexpected second S line in block")
        if not line.startswith("A "):
            raise M2ParseError(ln, f"expected an A line, got {line[:20]!r}")
        fields = line[2:].split("|||")
        if len(fields) != 6:
            raise M2ParseError(ln, f"expected 6 |||-separated fields, got {len(fields)}")
        span, etype, replacement, _required, _comment, annotator = fields
        span_parts = span.split()
        if len(span_parts) != 2:
            raise M2ParseError(ln, f"span must be two integers, got {span!r}")
        try:
            start, end = int(span_parts[0]), int(span_parts[1])
        except ValueError:
            raise M2ParseError(ln, f"non-integer span {span!r}") from None
        annotator = annotator.strip()
        if etype == "noop" or (start == -1 and end == -1):
            noop_annotators.add(annotator)
            by_annotator.setdefault(annotator, [])
            continue
        if end < start or start < 0:
            raise M2ParseError(ln, f"bad span ({start}, {end})")
        replacement = replacement.strip()
        if replacement == "-NONE-":
            replacement = ""
        try:
            edit = Edit(start, end, replacement, etype, annotator)
        except ValueError as exc:
            raise M2ParseError(ln, str(exc)) from None
        by_annotator.setdefault(annotator, []).append(edit)
    return line_no, tokens, by_annotator, noop_annotators


def to_m2(corpus: Corpus) -> str:
    """Serialize a corpus back to M2 text (round-trips through parse_m2)."""
    blocks = []
    for record in corpus:
        lines = ["S " + " ".join(record.tokens)]
        for ann in record.annotations:
            for e in ann.edits:
                repl = e.replacement if e.replacement else "-NONE-"
                lines.append(f"A {e.start} {e.end}|||{e.etype}|||{repl}|||REQUIRED|||-NONE-|||{ann.annotator}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def load_m2(path, intersection_policy: str = "merge") -> Corpus:
    with open(path, encoding="utf-8") as fh:
        corpus = parse_m2(fh, intersection_policy)
    corpus.provenance["path"] = str(path)
    return corpus


def attach_references(corpus: Corpus, references: Sequence[str]) -> Corpus:
    """Add one externally supplied reference per record.

    Reference files carry one line per sentence of the *original* file, so
    lines are aligned by pre-discard block index when the lengths say so, and
    positionally when the file was written against the retained records.
    """
    n_blocks = corpus.provenance.get("blocks", len(corpus.records))
    if len(references) == len(corpus.records):
        picked = list(references)
    elif len(references) == n_blocks:
        picked = [references[int(rec.sentence_id)] for rec in corpus.records]
    else:
        raise ValueError(
            f"reference file has {len(references)} lines; expected {n_blocks} "
            f"(original sentences) or {len(corpus.records)} (retained records)"
        )
    records = [
        replace(
            rec,
            references=rec.references + (ref.strip(),),
            ref_origins=rec.ref_origins + (None,),
        )
        for rec, ref in zip(corpus.records, picked)
    ]
    return Corpus(records, dict(corpus.provenance))
