"""Deterministic synthetic corpora for validation runs and tests.

Sentences are nonsense but well-formed token sequences; each annotation is a
random non-overlapping mix of insertions, deletions, and replacements, typed
with real NUCLE labels so type-sensitivity analyses have cells to fill.
"""

from __future__ import annotations

import random
from dataclasses import replace

from .corpus import Annotation, Corpus, Edit, SentenceRecord, realize_reference

_VOCAB = (
    "time", "people", "world", "school", "family", "moment", "music", "river",
    "garden", "window", "market", "letter", "animal", "street", "harbor",
    "story", "bridge", "doctor", "answer", "yellow", "quiet", "bright",
    "small", "early", "happy", "other", "walked", "carried", "believed",
    "opened", "wanted", "turned", "morning", "evening", "village", "dinner",
)

_ETYPES = ("ArtOrDet", "Mec", "Nn", "Prep", "SVA", "Vform", "Vt", "Wform")


def make_synthetic_corpus(
    n_sentences: int = 50,
    seed: int = 0,
    n_annotations: int = 2,
    min_edits: int = 1,
    max_edits: int = 6,
    min_tokens: int = 10,
    max_tokens: int = 18,
) -> Corpus:
    if max_edits < min_edits or min_edits < 1:
        raise ValueError("need 1 <= min_edits <= max_edits")
    if min_tokens <= max_edits + 1:
        raise ValueError("sentences must be longer than the largest edit set")
    rng = random.Random(seed)
    records = []
    for idx in range(n_sentences):
        length = rng.randint(min_tokens, max_tokens)
        tokens = tuple(rng.choice(_VOCAB) for _ in range(length))
        annotations = tuple(
            _random_annotation(str(a), tokens, rng.randint(min_edits, max_edits), rng)
            for a in range(n_annotations)
        )
        record = SentenceRecord(str(idx), tokens, annotations)
        references = tuple(realize_reference(record, ann.annotator) for ann in annotations)
        origins = tuple(ann.annotator for ann in annotations)
        records.append(replace(record, references=references, ref_origins=origins))
    return Corpus(records, provenance={"blocks": n_sentences, "discarded": 0, "synthetic_seed": seed})


def _random_annotation(annotator: str, tokens: tuple[str, ...], n_edits: int, rng: random.Random) -> Annotation:
    anchors = sorted(rng.sample(range(len(tokens)), n_edits))
    edits = []
    for pos in anchors:
        kind = rng.random()
        etype = rng.choice(_ETYPES)
        if kind < 0.25:
            word = rng.choice(_VOCAB)
            edits.append(Edit(pos, pos, word, etype, annotator))
        elif kind < 0.45:
            edits.append(Edit(pos, pos + 1, "", etype, annotator))
        else:
            word = rng.choice([w for w in _VOCAB if w != tokens[pos]])
            if rng.random() < 0.2:
                word = word + " " + rng.choice(_VOCAB)
            edits.append(Edit(pos, pos + 1, word, etype, annotator))
    return Annotation.make(annotator, edits)
