"""Seeded synthetic translation tasks."""

from __future__ import annotations

import itertools
import string

import numpy as np

from ..errors import DomainError
from ..model import Sequence, TaskSpec, Vocab


def _pseudo_words(rng: np.random.Generator, n: int) -> list[str]:
    letters = np.array(list(string.ascii_lowercase))
    words: list[str] = []
    while len(words) < n:
        w = "".join(rng.choice(letters, size=3))
        if w not in words:
            words.append(w)
    return words


def gen_synthetic_task(
    vocab_size: int = 12,
    order: int = 1,
    max_len: int = 12,
    noise: float = 0.1,
    seed: int = 0,
    n_sources: int = 20,
    min_target: int = 4,
    max_target: int | None = None,
) -> TaskSpec:
    """A source -> target task with one gold target per source.

    Tokens 0 and 1 are BOS and EOS; the rest are random three-letter words.
    Each gold target uses distinct content tokens, so every order-``k``
    context on the gold path has a unique successor. Contexts off the gold
    path get a random successor (EOS with probability 0.3). Each row is
    ``(1 - noise) * one_hot(successor) + noise * Dirichlet(1)`` over all
    tokens except BOS. The source sequence is the reversed gold content.
    """
    if order < 1:
        raise DomainError("synthetic tasks need markov order >= 1")
    if vocab_size < 3:
        raise DomainError("need at least one content token besides BOS/EOS")
    if not 0.0 <= noise <= 1.0:
        raise DomainError("noise must lie in [0, 1]")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    n_content = vocab_size - 2
    vocab = Vocab(("<s>", "</s>", *_pseudo_words(rng, n_content)), 0, 1)
    bos, eos = 0, 1
    content = np.arange(2, vocab_size)
    hi = min(n_content, max_len - 1) if max_target is None else max_target
    lo = min(min_target, hi)
    if hi < 1:
        raise DomainError("max_len too small for any target")

    sources, refs, tables = [], [], {}
    all_contexts = list(itertools.product(range(vocab_size), repeat=order))
    for s in range(n_sources):
        length = int(rng.integers(lo, hi + 1))
        gold = tuple(int(x) for x in rng.permutation(content)[:length]) + (eos,)
        refs.append((Sequence(gold, True),))
        sources.append(Sequence(tuple(reversed(gold[:-1])) + (eos,), True))
        padded = (bos,) * order + gold
        succ = {padded[t:t + order]: gold[t] for t in range(len(gold))}
        for ctx in all_contexts:
            if eos in ctx:
                continue
            nxt = succ.get(ctx)
            if nxt is None:
                nxt = eos if rng.random() < 0.3 else int(rng.choice(content))
            row = np.zeros(vocab_size)
            row[nxt] = 1.0 - noise
            if noise > 0.0:
                row[1:] += noise * rng.dirichlet(np.ones(vocab_size - 1))
            row /= row.sum()
            tables[(s, ctx)] = row
    return TaskSpec(vocab, tuple(sources), tables, tuple(refs), order, max_len)


def perturb_task(task: TaskSpec, level: float, seed: int) -> TaskSpec:
    """Mix every row toward a seeded Dirichlet draw; used for rank studies."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    v = task.vocab_size
    tables = {}
    for key in sorted(task.tables):
        row = (1.0 - level) * task.tables[key] + level * rng.dirichlet(np.ones(v))
        tables[key] = row / row.sum()
    return TaskSpec(task.vocab, task.sources, tables, task.references,
                    task.markov_order, task.max_len, task.default)
