"""Utilities and metrics on [0, 1]: sentence BLEU, chrF, exact match, diversity.

Every metric sees sequences with EOS stripped. chrF works on the surface
string obtained by joining token strings with single spaces; whitespace is
then ignored, as in standard chrF.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Hashable, Iterable

import numpy as np

from .errors import DomainError
from .model import Sequence, Vocab

UTILITIES = ("chrf", "sentence_bleu", "exact_match")


@dataclass(frozen=True)
class BleuResult:
    score: float
    # unsmoothed BLEU would be zero
    raw_zero: bool
    empty_hypothesis: bool


def _ngrams(tokens: tuple, n: int) -> Counter:
    return Counter(tokens[i:i + n] for i in range(len(tokens) - n + 1))


def bleu_details(hyp: Iterable[Hashable], ref: Iterable[Hashable], max_order: int = 4) -> BleuResult:
    """Sentence BLEU with add-one smoothing on orders that have no match.

    Order ``n`` contributes ``m_n / t_n`` when ``m_n > 0`` and
    ``1 / (t_n + 1)`` otherwise (so an order with no hypothesis n-grams
    contributes 1). Brevity penalty ``exp(1 - |r|/|h|)`` when ``|h| <= |r|``.
    """
    h, r = tuple(hyp), tuple(ref)
    if not h or not r:
        return BleuResult(0.0, True, not h)
    log_sum = 0.0
    raw_zero = False
    for n in range(1, max_order + 1):
        hc = _ngrams(h, n)
        total = sum(hc.values())
        if total == 0:
            continue
        rc = _ngrams(r, n)
        match = sum(min(c, rc[g]) for g, c in hc.items())
        if match == 0:
            raw_zero = True
            log_sum += math.log(1.0 / (total + 1))
        else:
            log_sum += math.log(match / total)
    bp = 1.0 if len(h) > len(r) else math.exp(1.0 - len(r) / len(h))
    return BleuResult(bp * math.exp(log_sum / max_order), raw_zero, False)


@lru_cache(maxsize=1 << 18)
def _bleu_cached(h: tuple, r: tuple, max_order: int) -> float:
    return bleu_details(h, r, max_order).score


def sentence_bleu(hyp, ref, max_order: int = 4) -> float:
    return _bleu_cached(tuple(hyp), tuple(ref), max_order)


def _char_ngram_counts(text: str, order: int) -> list[Counter]:
    chars = "".join(text.split())
    return [Counter(chars[i:i + n] for i in range(len(chars) - n + 1)) for n in range(1, order + 1)]


@lru_cache(maxsize=1 << 18)
def chrf_text(hyp: str, ref: str, char_order: int = 6, beta: float = 2.0) -> float:
    """chrF between two surface strings.

    Precision and recall are averaged over the orders where both sides have
    n-grams, then combined as F-beta. Both empty gives 1, one empty gives 0.
    """
    h = "".join(hyp.split())
    r = "".join(ref.split())
    if not h and not r:
        return 1.0
    if not h or not r:
        return 0.0
    hc = _char_ngram_counts(h, char_order)
    rc = _char_ngram_counts(r, char_order)
    precs, recs = [], []
    for hn, rn in zip(hc, rc):
        th, tr = sum(hn.values()), sum(rn.values())
        if th == 0 or tr == 0:
            continue
        m = sum(min(c, rn[g]) for g, c in hn.items())
        precs.append(m / th)
        recs.append(m / tr)
    p = sum(precs) / len(precs)
    rec = sum(recs) / len(recs)
    if p == 0.0 and rec == 0.0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * p * rec / (b2 * p + rec)


def chrf(hyp, ref, char_order: int = 6, beta: float = 2.0) -> float:
    """chrF of strings or token lists (lists are joined with spaces)."""
    if not isinstance(hyp, str):
        hyp = " ".join(hyp)
    if not isinstance(ref, str):
        ref = " ".join(ref)
    return chrf_text(hyp, ref, char_order, beta)


def exact_match(hyp, ref) -> float:
    return 1.0 if tuple(hyp) == tuple(ref) else 0.0


@dataclass(frozen=True)
class UtilityFn:
    """A utility bound to a vocabulary, callable on two :class:`Sequence` objects."""

    kind: str
    vocab: Vocab = field(repr=False)
    max_order: int = 4
    char_order: int = 6
    beta: float = 2.0

    def __post_init__(self):
        if self.kind not in UTILITIES:
            raise DomainError(f"unknown utility {self.kind!r}; choose from {UTILITIES}")

    def __call__(self, h: Sequence, r: Sequence) -> float:
        if self.kind == "exact_match":
            return exact_match(h.content, r.content)
        if self.kind == "sentence_bleu":
            return _bleu_cached(h.content, r.content, self.max_order)
        return chrf_text(self.vocab.text(h), self.vocab.text(r), self.char_order, self.beta)


def get_utility(kind: str, vocab: Vocab, **params) -> UtilityFn:
    return UtilityFn(kind, vocab, **params)


def diversity(pool, vocab: Vocab, *, exclude_self: bool = False) -> float:
    """Mean pairwise chrF over a pool of sequences, self-pairs included by default.

    Higher means *less* diverse. With ``exclude_self`` only ordered pairs of
    distinct positions are averaged (a singleton then scores 1).
    """
    seqs = [getattr(x, "sequence", x) for x in pool]
    if not seqs:
        raise DomainError("diversity of an empty pool")
    texts = [vocab.text(s) for s in seqs]
    n = len(texts)
    total = 0.0
    for i, a in enumerate(texts):
        for j, b in enumerate(texts):
            if exclude_self and i == j:
                continue
            total += chrf_text(a, b)
    if exclude_self:
        return 1.0 if n == 1 else total / (n * (n - 1))
    return total / (n * n)


def corpus_quality(hyps: list[Sequence], golds: list[Sequence], metric) -> float:
    """Mean sentence-level ``metric(hyp, gold)``."""
    if len(hyps) != len(golds):
        raise DomainError("hypothesis and gold lists differ in length")
    if not hyps:
        raise DomainError("empty corpus")
    return float(np.mean([metric(h, g) for h, g in zip(hyps, golds)]))
