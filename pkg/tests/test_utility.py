import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from dcmbr.errors import DomainError
from dcmbr.model import Sequence, Vocab
from dcmbr.utility import (
    bleu_details,
    chrf,
    chrf_text,
    corpus_quality,
    diversity,
    exact_match,
    get_utility,
    sentence_bleu,
)

words = st.lists(st.sampled_from("a b c d e".split()), max_size=8)
texts = st.text(alphabet="abc ", max_size=12)


class TestBleu:
    def test_identical(self):
        assert sentence_bleu("a b c d".split(), "a b c d".split()) == 1.0

    def test_brevity_penalty_frozen(self):
        got = sentence_bleu("a b c".split(), "a b c d e".split())
        assert got == pytest.approx(math.exp(-2 / 3), abs=1e-15)
        assert got == pytest.approx(0.513417119032592, abs=1e-15)

    def test_empty(self):
        d = bleu_details([], ["a"])
        assert d.score == 0.0 and d.empty_hypothesis

    def test_raw_zero_flag(self):
        d = bleu_details("a b".split(), "b a".split())
        assert d.raw_zero and d.score > 0.0
        assert not bleu_details("a b".split(), "a b".split()).raw_zero

    @given(words, words)
    def test_matches_oracle(self, h, r):
        assert sentence_bleu(h, r) == pytest.approx(oracles.bleu(h, r), abs=1e-12)

    @given(words, words)
    def test_range(self, h, r):
        assert 0.0 <= sentence_bleu(h, r) <= 1.0


class TestChrf:
    def test_frozen(self):
        assert chrf_text("abcd", "abce") == pytest.approx(23 / 48, abs=1e-15)

    def test_identical(self):
        assert chrf("a bc", "a bc") == 1.0

    def test_whitespace_ignored(self):
        assert chrf_text("ab c", "a bc") == 1.0

    def test_empties(self):
        assert chrf_text("", "") == 1.0
        assert chrf_text("", "a") == 0.0
        assert chrf_text("a", " ") == 0.0

    def test_token_lists_joined(self):
        assert chrf(["ab", "c"], ["abc"]) == 1.0

    @given(texts, texts)
    def test_matches_oracle(self, h, r):
        assert chrf_text(h, r) == pytest.approx(oracles.chrf(h, r), abs=1e-12)

    @given(texts, texts)
    def test_range(self, h, r):
        assert 0.0 <= chrf_text(h, r) <= 1.0


def test_exact_match():
    assert exact_match([1, 2], (1, 2)) == 1.0
    assert exact_match([1, 2], [1]) == 0.0


class TestUtilityFn:
    vocab = Vocab.build(["ab", "cd"])

    def test_strips_eos(self):
        u = get_utility("exact_match", self.vocab)
        assert u(Sequence((2, 3, 1), True), Sequence((2, 3), False)) == 1.0

    def test_chrf_uses_surface_text(self):
        u = get_utility("chrf", self.vocab)
        h, r = Sequence((2, 1), True), Sequence((2, 3, 1), True)
        assert u(h, r) == chrf_text("ab", "ab cd")

    def test_bleu_on_ids(self):
        u = get_utility("sentence_bleu", self.vocab)
        h = Sequence((2, 3, 1), True)
        assert u(h, h) == 1.0

    def test_unknown(self):
        with pytest.raises(DomainError):
            get_utility("meteor", self.vocab)


class TestDiversity:
    vocab = Vocab.build(["ab", "cd", "ef"])

    def test_identical_pool_is_one(self):
        s = Sequence((2, 3, 1), True)
        assert diversity([s] * 5, self.vocab) == 1.0

    def test_self_pairs_included(self):
        a, b = Sequence((2, 1), True), Sequence((4, 1), True)
        assert diversity([a, b], self.vocab) == pytest.approx(0.5)
        assert diversity([a, b], self.vocab, exclude_self=True) == 0.0

    def test_matches_double_loop(self):
        rng = random.Random(0)
        pool = [Sequence(tuple(rng.choice([2, 3, 4]) for _ in range(rng.randint(1, 4))) + (1,), True) for _ in range(8)]
        texts = [self.vocab.text(s) for s in pool]
        want = sum(oracles.chrf(a, b) for a in texts for b in texts) / 64
        assert diversity(pool, self.vocab) == pytest.approx(want, abs=1e-12)

    def test_empty(self):
        with pytest.raises(DomainError):
            diversity([], self.vocab)


def test_corpus_quality():
    assert corpus_quality([1, 2], [1, 3], lambda h, g: float(h == g)) == 0.5
    with pytest.raises(DomainError):
        corpus_quality([1], [], exact_match)
