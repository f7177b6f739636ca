import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gecvalid.corpus import (
    Annotation,
    Edit,
    M2ParseError,
    OverlapError,
    SpanError,
    apply_edits,
    edits_overlap,
    parse_m2,
    realize_reference,
    resolve_intersections,
    to_m2,
)

from conftest import CHAIN_BOTTOM, CHAIN_TOP, SMALL_M2

CHAIN_EDITS = (
    Edit(2, 3, "make", "SVA"),
    Edit(4, 6, "pace of life", "Wci"),
    Edit(9, 10, "leave", "Vt"),
)


def stepwise_apply(tokens, ordered_edits):
    """Independent oracle: apply edits one at a time, shifting later spans."""
    toks = list(tokens)
    applied = []
    for e in ordered_edits:
        shift = sum(
            len(f.replacement.split()) - (f.end - f.start)
            for f in applied
            if f.end <= e.start
        )
        toks[e.start + shift:e.end + shift] = e.replacement.split()
        applied.append(e)
    return toks


class TestEdit:
    def test_noop_rejected(self):
        with pytest.raises(ValueError):
            Edit(2, 2, "", "ArtOrDet")

    def test_bad_span_rejected(self):
        with pytest.raises(ValueError):
            Edit(3, 2, "x", "ArtOrDet")
        with pytest.raises(ValueError):
            Edit(-1, 2, "x", "ArtOrDet")

    def test_insertion_and_deletion_shapes(self):
        assert Edit(2, 2, "a", "ArtOrDet").is_insertion
        assert Edit(2, 3, "", "Rloc-").replacement_tokens == []


class TestOverlapPredicate:
    def test_disjoint_and_touching(self):
        assert not edits_overlap(Edit(0, 2, "x", "T"), Edit(2, 4, "y", "T"))
        assert not edits_overlap(Edit(2, 2, "x", "T"), Edit(2, 4, "y", "T"))
        assert not edits_overlap(Edit(0, 2, "x", "T"), Edit(2, 2, "y", "T"))

    def test_intersecting_spans(self):
        assert edits_overlap(Edit(0, 3, "x", "T"), Edit(2, 4, "y", "T"))
        assert edits_overlap(Edit(2, 4, "x", "T"), Edit(3, 3, "y", "T"))

    def test_same_position_insertions(self):
        assert edits_overlap(Edit(2, 2, "a", "T"), Edit(2, 2, "the", "T"))


class TestApplyEdits:
    def test_empty_set_is_identity(self):
        tokens = CHAIN_BOTTOM.split()
        assert apply_edits(tokens, []) == tokens

    def test_single_edit_from_chain(self):
        tokens = CHAIN_BOTTOM.split()
        out = apply_edits(tokens, [Edit(9, 10, "leave", "Vt")])
        assert " ".join(out) == CHAIN_BOTTOM.replace("left", "leave")

    def test_all_orders_agree(self):
        tokens = CHAIN_BOTTOM.split()
        results = {
            " ".join(apply_edits(tokens, list(order)))
            for order in itertools.permutations(CHAIN_EDITS)
        }
        assert results == {CHAIN_TOP}

    def test_insertion_at_replacement_boundary(self):
        tokens = ["A", "B"]
        out = apply_edits(tokens, [Edit(0, 0, "x", "T"), Edit(0, 1, "y", "T")])
        assert out == ["x", "y", "B"]

    def test_overlap_rejected(self):
        with pytest.raises(OverlapError):
            apply_edits(["a", "b", "c"], [Edit(0, 2, "x", "T"), Edit(1, 3, "y", "T")])

    def test_out_of_range_rejected(self):
        with pytest.raises(SpanError):
            apply_edits(["a", "b"], [Edit(1, 3, "x", "T")])

    def test_matches_stepwise_oracle_on_random_edit_sets(self):
        rng = random.Random(4)
        vocab = ["w%d" % i for i in range(12)]
        for _ in range(200):
            tokens = [rng.choice(vocab) for _ in range(rng.randint(6, 14))]
            anchors = sorted(rng.sample(range(len(tokens)), rng.randint(1, 5)))
            edits = []
            for pos in anchors:
                kind = rng.random()
                if kind < 0.3:
                    edits.append(Edit(pos, pos, rng.choice(vocab), "T"))
                elif kind < 0.5:
                    edits.append(Edit(pos, pos + 1, "", "T"))
                else:
                    edits.append(Edit(pos, pos + 1, rng.choice(vocab), "T"))
            shuffled = edits[:]
            rng.shuffle(shuffled)
            assert apply_edits(tokens, shuffled) == stepwise_apply(tokens, edits)


class TestRealizeReference:
    def test_chain_full_application(self):
        ann = Annotation.make("0", CHAIN_EDITS)
        from gecvalid.corpus import SentenceRecord

        record = SentenceRecord("s1", tuple(CHAIN_BOTTOM.split()), (ann,))
        assert realize_reference(record, "0") == CHAIN_TOP

    def test_unknown_annotator(self, small_corpus):
        with pytest.raises(KeyError):
            realize_reference(small_corpus.records[0], "nope")

    def test_equals_stepwise_walk(self, synth_corpus):
        for record in synth_corpus:
            for ann in record.annotations:
                walked = stepwise_apply(record.tokens, list(ann.edits))
                assert " ".join(walked) == realize_reference(record, ann.annotator)


class TestResolveIntersections:
    def test_identity_when_clean(self):
        ann = Annotation.make("0", CHAIN_EDITS)
        assert resolve_intersections(ann, "merge") is ann

    def test_merge_overlapping_pair(self):
        a = Edit(2, 4, "pace of life", "Wci")
        b = Edit(3, 4, "pattern", "Nn")
        merged = resolve_intersections(Annotation.make("0", [a, b]), "merge")
        assert len(merged.edits) == 1
        got = merged.edits[0]
        # first writer covers the union span; smaller etype wins
        assert (got.start, got.end) == (2, 4)
        assert got.replacement == "pace of life"
        assert got.etype == "Nn"

    def test_merge_partial_shadowing(self):
        a = Edit(2, 3, "x", "B")
        b = Edit(2, 5, "y z", "A")
        merged = resolve_intersections(Annotation.make("0", [a, b]), "merge")
        assert len(merged.edits) == 1
        assert (merged.edits[0].start, merged.edits[0].end) == (2, 5)
        assert merged.edits[0].replacement == "x y z"

    def test_reject_policy_names_both_edits(self):
        a = Edit(2, 4, "pace of life", "Wci")
        b = Edit(3, 4, "pattern", "Nn")
        with pytest.raises(OverlapError) as err:
            resolve_intersections(Annotation.make("0", [a, b]), "reject")
        assert err.value.pairs == [(a, b)]

    def test_merged_result_applies_cleanly(self):
        tokens = "t0 t1 t2 t3 t4 t5".split()
        ann = Annotation.make("0", [Edit(1, 3, "a b", "X"), Edit(2, 4, "c", "Y"), Edit(5, 6, "d", "Z")])
        merged = resolve_intersections(ann, "merge")
        assert not merged.overlapping_pairs()
        apply_edits(tokens, merged.edits)


class TestParseM2:
    def test_spec_insertion_example(self):
        corpus = parse_m2(
            "S I want book\n"
            "A 2 2|||ArtOrDet|||a|||REQUIRED|||-NONE-|||0\n"
        )
        assert len(corpus) == 1
        record = corpus.records[0]
        assert record.tokens == ("I", "want", "book")
        (ann,) = record.annotations
        assert ann.edits == (Edit(2, 2, "a", "ArtOrDet", "0"),)
        assert record.references == ("I want a book",)

    def test_small_fixture(self, small_corpus):
        assert len(small_corpus) == 2
        assert small_corpus.provenance["annotators"] == ["0", "1"]
        rec = small_corpus.records[1]
        assert realize_reference(rec, "0") == "The dog barks"
        assert realize_reference(rec, "1") == "the dog dogs barks"

    def test_discard_record_without_edits_for_all_annotators(self):
        text = SMALL_M2 + "\nS nothing wrong here\n"
        corpus = parse_m2(text)
        assert len(corpus) == 2
        assert corpus.provenance["discarded"] == 1

    def test_noop_annotation_triggers_discard(self):
        text = (
            "S fine sentence\n"
            "A -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||0\n"
            "A 0 1|||Mec|||Fine|||REQUIRED|||-NONE-|||1\n"
        )
        corpus = parse_m2(text)
        assert len(corpus) == 0
        assert corpus.provenance["discarded"] == 1

    def test_malformed_line_reports_location(self):
        text = (
            "S one\n"
            "A 0 1|||T|||x|||REQUIRED|||-NONE-|||0\n"
            "\n"
            "S two\n"
            "A 0 one|||T|||x|||REQUIRED|||-NONE-|||0\n"
            "\n"
            "S three\n"
            "A 0 1|||T|||y|||REQUIRED|||-NONE-|||0\n"
        )
        with pytest.raises(M2ParseError) as err:
            parse_m2(text)
        assert "line 5" in str(err.value)

    def test_reversed_span_rejected(self):
        with pytest.raises(M2ParseError):
            parse_m2("S a b c\nA 2 1|||T|||x|||REQUIRED|||-NONE-|||0\n")

    def test_wrong_field_count_rejected(self):
        with pytest.raises(M2ParseError):
            parse_m2("S a b c\nA 0 1|||T|||x|||0\n")

    def test_span_beyond_sentence_rejected(self):
        with pytest.raises(M2ParseError):
            parse_m2("S a b\nA 2 3|||T|||x|||REQUIRED|||-NONE-|||0\n")

    def test_noop_shaped_edit_rejected(self):
        with pytest.raises(M2ParseError):
            parse_m2("S a b\nA 1 1|||T|||-NONE-|||REQUIRED|||-NONE-|||0\n")

    def test_overlap_merged_by_default(self):
        text = (
            "S a b c d e\n"
            "A 1 3|||Wci|||x y|||REQUIRED|||-NONE-|||0\n"
            "A 2 4|||Nn|||z|||REQUIRED|||-NONE-|||0\n"
        )
        corpus = parse_m2(text)
        (record,) = corpus.records
        assert len(record.annotations[0].edits) == 1
        with pytest.raises(OverlapError):
            parse_m2(text, intersection_policy="reject")

    def test_round_trip(self, small_corpus):
        reparsed = parse_m2(to_m2(small_corpus))
        assert reparsed.records == small_corpus.records

    def test_round_trip_synthetic(self, synth_corpus):
        reparsed = parse_m2(to_m2(synth_corpus))
        assert reparsed.records == synth_corpus.records

    def test_all_loaded_annotations_nonempty(self, synth_corpus):
        for record in synth_corpus:
            for ann in record.annotations:
                assert len(ann.edits) >= 1


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_apply_edits_order_independent(data):
    length = data.draw(st.integers(6, 12))
    tokens = [f"t{i}" for i in range(length)]
    n_edits = data.draw(st.integers(1, 4))
    anchors = sorted(data.draw(st.permutations(range(length)))[:n_edits])
    edits = []
    for pos in anchors:
        kind = data.draw(st.sampled_from(["ins", "del", "sub"]))
        if kind == "ins":
            edits.append(Edit(pos, pos, "new", "T"))
        elif kind == "del":
            edits.append(Edit(pos, pos + 1, "", "T"))
        else:
            edits.append(Edit(pos, pos + 1, "sub", "T"))
    order = data.draw(st.permutations(edits))
    assert apply_edits(tokens, list(order)) == apply_edits(tokens, edits)
