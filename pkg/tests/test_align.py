import random
from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gecvalid.align import (
    MATCH,
    alignment_cost,
    extract_edits,
    lev_similarity,
    levenshtein,
    token_align,
)
from gecvalid.corpus import apply_edits

from conftest import CHAIN_BOTTOM, CHAIN_TOP


def brute_levenshtein(a, b):
    """Plain recursive definition, memoized; the DP oracle for short strings."""

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(
            rec(i + 1, j) + 1,
            rec(i, j + 1) + 1,
            rec(i + 1, j + 1) + (a[i] != b[j]),
        )

    return rec(0, 0)


def brute_align_cost(src, tgt):
    """Minimal alignment cost over all alignments, in tenths."""

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == len(src) and j == len(tgt):
            return 0
        best = 10 ** 9
        if i < len(src):
            best = min(best, rec(i + 1, j) + 10)
        if j < len(tgt):
            best = min(best, rec(i, j + 1) + 10)
        if i < len(src) and j < len(tgt):
            if src[i] == tgt[j]:
                step = 0
            elif src[i].lower() == tgt[j].lower():
                step = 1
            else:
                step = 10
            best = min(best, rec(i + 1, j + 1) + step)
        return best

    return rec(0, 0) / 10.0


class TestLevenshtein:
    def test_identity(self):
        assert levenshtein("same", "same") == 0

    def test_textbook(self):
        assert levenshtein("kitten", "sitting") == 3

    def test_empty(self):
        assert levenshtein("", "abcd") == 4
        assert levenshtein("abcd", "") == 4

    def test_against_brute_force(self):
        rng = random.Random(1)
        for _ in range(200):
            a = "".join(rng.choice("abc") for _ in range(rng.randint(0, 7)))
            b = "".join(rng.choice("abc") for _ in range(rng.randint(0, 7)))
            assert levenshtein(a, b) == brute_levenshtein(a, b)

    @settings(max_examples=100, deadline=None)
    @given(st.text("abcd", max_size=12), st.text("abcd", max_size=12))
    def test_symmetry(self, a, b):
        assert levenshtein(a, b) == levenshtein(b, a)

    @settings(max_examples=100, deadline=None)
    @given(st.text("ab", max_size=8), st.text("ab", max_size=8), st.text("ab", max_size=8))
    def test_triangle_inequality(self, a, b, c):
        assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


class TestLevSimilarity:
    def test_identical(self):
        assert lev_similarity("abc", "abc") == 1.0

    def test_hand_dp(self):
        assert lev_similarity("ab", "abcd") == 0.5

    def test_negative_allowed(self):
        assert lev_similarity("aaaaaaaaaa", "b") == 1.0 - 10.0

    def test_empty_normalizer(self):
        with pytest.raises(ValueError):
            lev_similarity("abc", "")


class TestTokenAlign:
    def test_identical_all_match(self):
        toks = "the cat sat".split()
        ops = token_align(toks, toks)
        assert [op.kind for op in ops] == [MATCH] * 3

    def test_insertion_example(self):
        ops = token_align(["I", "want", "book"], ["I", "want", "a", "book"])
        kinds = [op.kind for op in ops]
        assert kinds == [MATCH, MATCH, "insert", MATCH]

    def test_cost_matches_exhaustive_oracle(self):
        rng = random.Random(9)
        vocab = ["aa", "bb", "Aa", "cc", "dd"]
        for _ in range(150):
            src = [rng.choice(vocab) for _ in range(rng.randint(0, 6))]
            tgt = [rng.choice(vocab) for _ in range(rng.randint(0, 6))]
            ops = token_align(src, tgt)
            assert alignment_cost(ops, src, tgt) == brute_align_cost(tuple(src), tuple(tgt))

    def test_cost_bound(self):
        rng = random.Random(10)
        for _ in range(50):
            src = [rng.choice("abcdef") for _ in range(rng.randint(0, 8))]
            tgt = [rng.choice("abcdef") for _ in range(rng.randint(0, 8))]
            ops = token_align(src, tgt)
            assert alignment_cost(ops, src, tgt) <= len(src) + len(tgt)

    def test_case_only_prefers_substitution(self):
        ops = token_align(["the", "Cat"], ["the", "cat"])
        assert [op.kind for op in ops] == [MATCH, "substitute"]


class TestExtractEdits:
    def test_identity_empty(self):
        toks = "a b c".split()
        assert extract_edits(toks, toks) == []

    def test_insertion_only_edit(self):
        edits = extract_edits(["I", "want", "book"], ["I", "want", "a", "book"])
        assert [(e.start, e.end, e.replacement) for e in edits] == [(2, 2, "a")]
        assert all(e.etype == "UNK" for e in edits)

    def test_chain_pair_three_edits_round_trip(self):
        src = CHAIN_BOTTOM.split()
        tgt = CHAIN_TOP.split()
        edits = extract_edits(src, tgt)
        assert len(edits) == 3
        assert apply_edits(src, [e.as_edit() for e in edits]) == tgt

    def test_adjacent_ops_coalesce(self):
        edits = extract_edits("a b c d".split(), "a X Y d".split())
        assert [(e.start, e.end, e.replacement) for e in edits] == [(1, 3, "X Y")]

    def test_round_trip_random(self):
        rng = random.Random(3)
        vocab = ["w%d" % i for i in range(6)]
        for _ in range(300):
            src = [rng.choice(vocab) for _ in range(rng.randint(0, 9))]
            tgt = [rng.choice(vocab) for _ in range(rng.randint(0, 9))]
            edits = extract_edits(src, tgt)
            assert apply_edits(src, [e.as_edit() for e in edits]) == tgt

    @settings(max_examples=120, deadline=None)
    @given(
        st.lists(st.sampled_from(["x", "y", "z", "X"]), max_size=8),
        st.lists(st.sampled_from(["x", "y", "z", "X"]), max_size=8),
    )
    def test_round_trip_property(self, src, tgt):
        edits = extract_edits(src, tgt)
        assert apply_edits(src, [e.as_edit() for e in edits]) == tgt
