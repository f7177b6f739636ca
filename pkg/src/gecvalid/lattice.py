"""Correction lattices: the powerset of an annotation's edits.

A lattice node is a bitmask over the annotation's edits (bit i = edit i of
the lattice's fixed edit order).  The empty mask realizes the original
sentence, the full mask the perfect correction.  Subset containment is the
gold partial order; the quality score embeds it into [0, 1] linearly.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

from .corpus import Corpus, Edit, SentenceRecord, apply_edits
from .seeds import derive_rng

VARIANCE_TARGET = 0.9


@dataclass(eq=False)
class CorrectionLattice:
    """All 2^n subsets of one annotation's edits for one sentence."""

    sentence_id: str
    annotator: str
    tokens: tuple[str, ...]
    edits: tuple[Edit, ...]
    _realized: dict[int, tuple[str, ...]] = field(default_factory=dict, repr=False)

    @staticmethod
    def from_record(record: SentenceRecord, annotator: str) -> "CorrectionLattice":
        ann = record.annotation(annotator)
        return CorrectionLattice(record.sentence_id, annotator, record.tokens, ann.edits)

    @property
    def n_edits(self) -> int:
        return len(self.edits)

    @property
    def full_mask(self) -> int:
        return (1 << self.n_edits) - 1

    def key(self) -> tuple[str, str]:
        return (self.sentence_id, self.annotator)

    def realize(self, mask: int) -> tuple[str, ...]:
        if mask < 0 or mask > self.full_mask:
            raise ValueError(f"mask {mask:#x} outside lattice of {self.n_edits} edits")
        cached = self._realized.get(mask)
        if cached is None:
            selected = [e for i, e in enumerate(self.edits) if mask >> i & 1]
            cached = tuple(apply_edits(self.tokens, selected))
            self._realized[mask] = cached
        return cached

    def node(self, mask: int) -> "Correction":
        return Correction(self, mask)


@dataclass(frozen=True, eq=False)
class Correction:
    """One lattice node: an edit subset plus its realized sentence."""

    lattice: CorrectionLattice
    mask: int

    def __post_init__(self):
        if self.mask < 0 or self.mask > self.lattice.full_mask:
            raise ValueError(f"mask {self.mask:#x} outside lattice")

    @property
    def size(self) -> int:
        return self.mask.bit_count()

    @property
    def tokens(self) -> tuple[str, ...]:
        return self.lattice.realize(self.mask)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def __eq__(self, other):
        return (
            isinstance(other, Correction)
            and self.lattice.key() == other.lattice.key()
            and self.mask == other.mask
        )

    def __hash__(self):
        return hash((self.lattice.key(), self.mask))


def leq(a: Correction, b: Correction) -> bool:
    """Gold partial order: a <= b iff a's edit subset is contained in b's."""
    if a.lattice.key() != b.lattice.key():
        raise ValueError(f"corrections from different lattices: {a.lattice.key()} vs {b.lattice.key()}")
    return a.mask & ~b.mask == 0


@dataclass(frozen=True)
class Chain:
    """A maximal monotone path from the empty set to the full edit set.

    ``perm[i]`` is the edit index added at step i+1; ``source_index`` selects
    the node treated as the system input.
    """

    lattice: CorrectionLattice
    perm: tuple[int, ...]
    source_index: int

    def __post_init__(self):
        if sorted(self.perm) != list(range(self.lattice.n_edits)):
            raise ValueError("perm must be a permutation of the lattice's edit indices")
        if not 0 <= self.source_index <= self.lattice.n_edits:
            raise ValueError("source index out of range")

    def masks(self) -> list[int]:
        out = [0]
        m = 0
        for idx in self.perm:
            m |= 1 << idx
            out.append(m)
        return out

    def nodes(self) -> list[Correction]:
        return [self.lattice.node(m) for m in self.masks()]

    @property
    def source(self) -> Correction:
        return self.lattice.node(self.masks()[self.source_index])


def original_quality(record: SentenceRecord) -> float:
    """Quality of the uncorrected sentence: 1 - min(edits)/tokens, floored at 0."""
    min_edits = min(len(ann.edits) for ann in record.annotations)
    return max(0.0, 1.0 - min_edits / len(record.tokens))


def quality_score(correction: Correction, record: SentenceRecord) -> float:
    """Linear quality in [0, 1]: original at its floor score, full set at 1.

    A function of (lattice, subset size) only, so every chain through a node
    assigns it the same value.
    """
    if correction.lattice.sentence_id != record.sentence_id:
        raise ValueError("correction does not belong to this record")
    orig = original_quality(record)
    n = correction.lattice.n_edits
    return orig + correction.size * (1.0 - orig) / n


def sample_chains(lattice: CorrectionLattice, n_chains: int, rng: random.Random) -> list[Chain]:
    """Uniformly sample distinct chains, each with a uniform source node.

    When the lattice has fewer chains than requested, all of them are
    returned (in lexicographic permutation order).
    """
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    n = lattice.n_edits
    total = math.factorial(n)
    perms: list[tuple[int, ...]]
    if n_chains >= total:
        perms = list(itertools.permutations(range(n)))
    else:
        seen: set[tuple[int, ...]] = set()
        perms = []
        while len(perms) < n_chains:
            perm = tuple(rng.sample(range(n), n))
            if perm not in seen:
                seen.add(perm)
                perms.append(perm)
    return [Chain(lattice, perm, rng.randint(0, n)) for perm in perms]


@dataclass(frozen=True)
class CorpusModel:
    """Sampling distribution for the number of edits a synthetic system applies.

    The draw has mean ``expected_edits`` exactly and variance as close to 0.9
    as an integer-trial binomial allows; draws are clipped to the lattice size
    at application sites.  ``expected_edits == 0`` is deterministic.
    """

    expected_edits: float

    def __post_init__(self):
        if self.expected_edits < 0:
            raise ValueError("expected_edits must be >= 0")

    def _binomial_params(self) -> tuple[int, float]:
        m = self.expected_edits
        n = max(1, round(m * m / (m - VARIANCE_TARGET)))
        return n, m / n

    def sample_count(self, rng: random.Random) -> int:
        """One unclipped draw of the edit count."""
        m = self.expected_edits
        if m == 0:
            return 0
        if m <= VARIANCE_TARGET:
            # binomial variance 0.9 unreachable below mean 0.9
            return _poisson(m, rng)
        n, p = self._binomial_params()
        return sum(rng.random() < p for _ in range(n))


def _poisson(mean: float, rng: random.Random) -> int:
    limit = math.exp(-mean)
    k = 0
    prod = rng.random()
    while prod > limit:
        k += 1
        prod *= rng.random()
    return k


def sample_model_corpus(corpus: Corpus, model: CorpusModel, seed: int, purpose: str = "model") -> list[Correction]:
    """One correction per sentence at the model's expected edit count.

    Per sentence: a uniform annotation, an edit count drawn from the model
    (clipped to the lattice size), and a uniform subset of that size.
    """
    out: list[Correction] = []
    for record in corpus:
        rng = derive_rng(seed, record.sentence_id, purpose, model.expected_edits)
        ann = record.annotations[rng.randrange(len(record.annotations))]
        lattice = CorrectionLattice.from_record(record, ann.annotator)
        count = min(model.sample_count(rng), lattice.n_edits)
        mask = 0
        for idx in sorted(rng.sample(range(lattice.n_edits), count)):
            mask |= 1 << idx
        out.append(lattice.node(mask))
    return out


def sample_source_corpus(corpus: Corpus, seed: int, purpose: str = "source") -> list[Correction]:
    """One uniform lattice node per sentence (uniform annotation first)."""
    out: list[Correction] = []
    for record in corpus:
        rng = derive_rng(seed, record.sentence_id, purpose)
        ann = record.annotations[rng.randrange(len(record.annotations))]
        lattice = CorrectionLattice.from_record(record, ann.annotator)
        out.append(lattice.node(rng.getrandbits(lattice.n_edits)))
    return out


def comparable_pairs(corrections: Iterable[Correction]) -> list[tuple[Correction, Correction]]:
    """All unique (lower, higher) pairs ordered by strict subset containment.

    Pairs are deduplicated by (lattice, mask pair); nodes from different
    lattices are never compared.
    """
    by_lattice: dict[tuple[str, str], dict[int, Correction]] = {}
    order: list[tuple[str, str]] = []
    for c in corrections:
        key = c.lattice.key()
        if key not in by_lattice:
            by_lattice[key] = {}
            order.append(key)
        by_lattice[key].setdefault(c.mask, c)

    pairs: list[tuple[Correction, Correction]] = []
    for key in order:
        nodes = by_lattice[key]
        masks = sorted(nodes)
        for i, u in enumerate(masks):
            for v in masks[i + 1:]:
                if u & ~v == 0 and u != v:
                    pairs.append((nodes[u], nodes[v]))
    return pairs


def single_edit_pairs(chains: Sequence[Chain], etype: str) -> list[tuple[Correction, Correction]]:
    """Pairs of sampled nodes that differ by exactly one edit of ``etype``.

    The first element is the smaller (uncorrected) side.  Nodes are pooled
    across all chains of the same lattice and pairs deduplicated by mask.
    """
    return [
        (lattice.node(u), lattice.node(v))
        for lattice, u, v, _ in _single_edit_scan(chains)
        if lattice.edits[(u ^ v).bit_length() - 1].etype == etype
    ]


def _single_edit_scan(chains: Sequence[Chain]):
    """Yield (lattice, lower mask, higher mask, chain index of lower node)."""
    by_lattice: dict[tuple[str, str], tuple[CorrectionLattice, dict[int, int]]] = {}
    order: list[tuple[str, str]] = []
    for idx, chain in enumerate(chains):
        key = chain.lattice.key()
        if key not in by_lattice:
            by_lattice[key] = (chain.lattice, {})
            order.append(key)
        masks = by_lattice[key][1]
        for m in chain.masks():
            masks.setdefault(m, idx)

    for key in order:
        lattice, masks = by_lattice[key]
        for u in sorted(masks):
            for bit in range(lattice.n_edits):
                if u >> bit & 1:
                    continue
                v = u | (1 << bit)
                if v in masks:
                    yield lattice, u, v, masks[u]


def write_node_log(fh: TextIO, header: dict, rows: Iterable[tuple]) -> None:
    """Line-oriented node log: header comments, then one TSV record per node.

    Columns: sentence id, annotation id, tag (chain index / position / src
    marker, empty for plain samples), subset bitmask in hex, realized text.
    """
    fh.write("# gecvalid node log v1\n")
    for k in sorted(header):
        fh.write(f"# {k}={header[k]}\n")
    fh.write("# columns: sentence_id\tannotator\ttag\tmask_hex\trealized\n")
    for sid, annotator, tag, mask, realized in rows:
        fh.write(f"{sid}\t{annotator}\t{tag}\t{mask:#x}\t{realized}\n")


def chain_log_rows(chains: Sequence[Chain]) -> list[tuple]:
    rows = []
    for idx, chain in enumerate(chains):
        src = chain.source_index
        for pos, mask in enumerate(chain.masks()):
            tag = f"chain={idx} pos={pos}" + (" src" if pos == src else "")
            rows.append((chain.lattice.sentence_id, chain.lattice.annotator, tag, mask, " ".join(chain.lattice.realize(mask))))
    return rows


def correction_log_rows(corrections: Sequence[Correction], tag: str = "") -> list[tuple]:
    return [
        (c.lattice.sentence_id, c.lattice.annotator, tag, c.mask, c.text)
        for c in corrections
    ]
