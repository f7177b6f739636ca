"""Levenshtein machinery and automatic edit extraction.

Token alignment uses unit insert/delete/substitute costs with a discounted
substitution (0.1) for case-only differences, so case fixes align as
substitutions instead of delete+insert pairs.  Costs are kept as integers
(tenths) internally so ties are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import Edit

MATCH, SUBSTITUTE, DELETE, INSERT = "match", "substitute", "delete", "insert"

_COST_MATCH = 0
_COST_CASE_SUB = 1  # tenths
_COST_SUB = 10
_COST_GAP = 10

# backtrace preference at equal cost
_PREFERENCE = {MATCH: 0, SUBSTITUTE: 1, DELETE: 2, INSERT: 3}


@dataclass(frozen=True)
class AlignmentOp:
    kind: str
    source_start: int
    source_end: int
    target_start: int
    target_end: int


@dataclass(frozen=True)
class ExtractedEdit:
    start: int
    end: int
    replacement: str
    etype: str = "UNK"

    def as_edit(self, annotator: str = "auto") -> Edit:
        return Edit(self.start, self.end, self.replacement, self.etype, annotator)


def levenshtein(a: str, b: str) -> int:
    """Unit-cost character edit distance."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[len(b)]


def lev_similarity(a: str, b: str) -> float:
    """1 - distance/len(b): similarity normalized by the second string.

    May be negative when ``a`` is much longer than ``b``; never clipped.
    """
    if not b:
        raise ValueError("cannot normalize by an empty string")
    return 1.0 - levenshtein(a, b) / len(b)


def _sub_cost(s: str, t: str) -> int:
    if s == t:
        return _COST_MATCH
    if s.lower() == t.lower():
        return _COST_CASE_SUB
    return _COST_SUB


def token_align(source: Sequence[str], candidate: Sequence[str]) -> list[AlignmentOp]:
    """Minimal-cost token alignment with deterministic tie-breaking.

    Ties prefer match > substitute > delete > insert while walking back from
    the end of both sequences.
    """
    n, m = len(source), len(candidate)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i * _COST_GAP
    for j in range(1, m + 1):
        dist[0][j] = j * _COST_GAP
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        s_tok = source[i - 1]
        for j in range(1, m + 1):
            row[j] = min(
                prev[j - 1] + _sub_cost(s_tok, candidate[j - 1]),
                prev[j] + _COST_GAP,
                row[j - 1] + _COST_GAP,
            )

    ops: list[AlignmentOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        candidates = []
        if i > 0 and j > 0:
            cost = _sub_cost(source[i - 1], candidate[j - 1])
            if dist[i][j] == dist[i - 1][j - 1] + cost:
                kind = MATCH if cost == _COST_MATCH else SUBSTITUTE
                candidates.append((kind, i - 1, j - 1))
        if i > 0 and dist[i][j] == dist[i - 1][j] + _COST_GAP:
            candidates.append((DELETE, i - 1, j))
        if j > 0 and dist[i][j] == dist[i][j - 1] + _COST_GAP:
            candidates.append((INSERT, i, j - 1))
        kind, pi, pj = min(candidates, key=lambda c: _PREFERENCE[c[0]])
        ops.append(AlignmentOp(kind, pi, i, pj, j))
        i, j = pi, pj
    ops.reverse()
    return ops


def alignment_cost(ops: Sequence[AlignmentOp], source: Sequence[str], candidate: Sequence[str]) -> float:
    total = 0
    for op in ops:
        if op.kind == MATCH:
            continue
        if op.kind == SUBSTITUTE:
            total += _sub_cost(source[op.source_start], candidate[op.target_start])
        else:
            total += _COST_GAP
    return total / 10.0


def extract_edits(source: Sequence[str], candidate: Sequence[str]) -> list[ExtractedEdit]:
    """Edits that rewrite ``source`` into ``candidate`` exactly.

    Maximal runs of consecutive non-match alignment ops coalesce into single
    edits, so a substitution adjacent to an insertion becomes one replacement.
    """
    ops = token_align(source, candidate)
    edits: list[ExtractedEdit] = []
    run: list[AlignmentOp] = []

    def flush():
        if not run:
            return
        start = run[0].source_start
        end = run[-1].source_end
        replacement = " ".join(candidate[run[0].target_start:run[-1].target_end])
        edits.append(ExtractedEdit(start, end, replacement))
        run.clear()

    for op in ops:
        if op.kind == MATCH:
            flush()
        else:
            run.append(op)
    flush()
    return edits
