"""Vocabularies, sequences and exactly computable autoregressive models.

A :class:`TaskSpec` holds ground-truth next-token tables keyed by
``(source index, context)`` where the context is the last ``markov_order``
target tokens, left-padded with BOS. A :class:`ConditionalLM` is the
label-smoothed optimum of a task: every conditional is
``smooth_mixture(task conditional, lam)``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import DomainError, IngestionError
from .smoothing import apply_temperature, smooth_mixture

PROB_ATOL = 1e-12
# log-probability of a sequence that contains a structurally impossible step
ZERO_PROB = -math.inf

Context = tuple[int, ...]
TableKey = tuple[int, Context]


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]
    bos_id: int
    eos_id: int
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if len(self.tokens) < 2:
            raise DomainError("a vocabulary needs at least two tokens")
        index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise DomainError("vocabulary tokens must be distinct")
        for name in ("bos_id", "eos_id"):
            if not 0 <= getattr(self, name) < len(self.tokens):
                raise DomainError(f"{name} outside vocabulary")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def build(cls, words: Iterable[str], bos: str = "<s>", eos: str = "</s>") -> "Vocab":
        toks = [bos, eos] + sorted(set(words) - {bos, eos})
        return cls(tuple(toks), 0, 1)

    def id(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise IngestionError(f"unknown token {token!r}") from None

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def encode(self, tokens: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.id(t) for t in tokens)

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def seq(self, ids: Iterable[int]) -> "Sequence":
        """Validated sequence; ``terminated`` is set iff the last id is EOS."""
        ids = tuple(int(i) for i in ids)
        v = len(self.tokens)
        for i in ids:
            if not 0 <= i < v:
                raise DomainError(f"token id {i} outside vocabulary of size {v}")
        if self.eos_id in ids[:-1]:
            raise DomainError("EOS may only appear as the final token")
        return Sequence(ids, bool(ids) and ids[-1] == self.eos_id)

    def text(self, seq: "Sequence") -> str:
        """Space-joined surface string with EOS removed."""
        return " ".join(self.decode(seq.content))


@dataclass(frozen=True, order=True)
class Sequence:
    token_ids: tuple[int, ...]
    terminated: bool = False

    def __len__(self) -> int:
        return len(self.token_ids)

    @property
    def content(self) -> tuple[int, ...]:
        """Token ids without the trailing EOS."""
        return self.token_ids[:-1] if self.terminated else self.token_ids


def check_probdist(p, what: str = "distribution") -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise DomainError(f"{what} must be a vector")
    if np.any(p < 0.0) or not np.all(np.isfinite(p)):
        raise DomainError(f"{what} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > PROB_ATOL:
        raise DomainError(f"{what} sums to {p.sum()!r}, not 1")
    return p


@dataclass(frozen=True)
class TaskSpec:
    """Ground-truth conditional tables for a set of sources.

    ``default`` is used for any context missing from ``tables``; ``None``
    means the uniform distribution.
    """

    vocab: Vocab
    sources: tuple[Sequence, ...]
    tables: Mapping[TableKey, np.ndarray]
    references: tuple[tuple[Sequence, ...], ...]
    markov_order: int
    max_len: int
    default: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "references", tuple(tuple(r) for r in self.references))
        if self.markov_order < 0:
            raise DomainError("markov_order must be non-negative")
        if self.max_len < 1:
            raise DomainError("max_len must be at least 1")
        if len(self.references) != len(self.sources):
            raise DomainError("one reference list per source is required")
        v = len(self.vocab)
        tables = {}
        for (src, ctx), row in self.tables.items():
            if not 0 <= src < len(self.sources):
                raise DomainError(f"table for unknown source {src}")
            if len(ctx) != self.markov_order:
                raise DomainError(f"context {ctx} does not have length {self.markov_order}")
            row = check_probdist(row, f"table row {(src, ctx)}")
            if row.shape[0] != v:
                raise DomainError(f"table row {(src, ctx)} has wrong length")
            row.setflags(write=False)
            tables[(int(src), tuple(int(c) for c in ctx))] = row
        object.__setattr__(self, "tables", tables)
        if self.default is not None:
            d = check_probdist(self.default, "default distribution")
            d.setflags(write=False)
            object.__setattr__(self, "default", d)
        for refs in self.references:
            for r in refs:
                if not r.terminated or len(r) > self.max_len:
                    raise DomainError("gold references must end with EOS within max_len")

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def context(self, prefix: Iterable[int]) -> Context:
        k = self.markov_order
        if k == 0:
            return ()
        prefix = tuple(prefix)[-k:]
        return (self.vocab.bos_id,) * (k - len(prefix)) + prefix

    def conditional(self, source_idx: int, prefix: Iterable[int]) -> np.ndarray:
        row = self.tables.get((source_idx, self.context(prefix)))
        if row is not None:
            return row
        if self.default is not None:
            return self.default
        return np.full(self.vocab_size, 1.0 / self.vocab_size)

    def eval_set(self) -> list[tuple[int, Sequence]]:
        """Every (source index, gold reference) pair."""
        return [(i, r) for i, refs in enumerate(self.references) for r in refs]


class TemperedTables:
    """All conditionals of a model at one temperature, stacked for fast lookup."""

    def __init__(self, lm: "ConditionalLM", t: float):
        self.t = t
        self.probs = apply_temperature(lm._probs, t)
        self.probs.setflags(write=False)
        with np.errstate(divide="ignore"):
            logp = np.log(self.probs)
        self.log_lists = logp.tolist()
        self.cdf_lists = np.cumsum(self.probs, axis=1).tolist()
        # last token with positive mass: target for u >= cdf[-1] after rounding
        self.last_positive = [int(np.flatnonzero(r)[-1]) for r in self.probs]


class ConditionalLM:
    """Label-smoothed optimum of a task, queried at any softmax temperature.

    Instances are immutable; the per-temperature table cache is a pure
    memo guarded by a lock.
    """

    def __init__(self, task: TaskSpec, lam: float):
        v = task.vocab_size
        if not 0.0 <= lam < (v - 1) / v:
            raise DomainError(f"lam must lie in [0, {(v - 1) / v}), got {lam}")
        self.task = task
        self.lam = float(lam)
        keys = list(task.tables)
        self._row_of = {key: i for i, key in enumerate(keys)}
        default = task.default if task.default is not None else np.full(v, 1.0 / v)
        stacked = np.stack([task.tables[k] for k in keys] + [default])
        self._probs = smooth_mixture(stacked, self.lam)
        self._probs.setflags(write=False)
        self._default_row = len(keys)
        self._cache: dict[float, TemperedTables] = {}
        self._lock = threading.Lock()

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cache"] = {}
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    @property
    def vocab(self) -> Vocab:
        return self.task.vocab

    @property
    def vocab_size(self) -> int:
        return self.task.vocab_size

    @property
    def max_len(self) -> int:
        return self.task.max_len

    def row_index(self, source_idx: int, prefix: Iterable[int]) -> int:
        return self._row_of.get((source_idx, self.task.context(prefix)), self._default_row)

    def row_for_context(self, source_idx: int, ctx: Context) -> int:
        return self._row_of.get((source_idx, ctx), self._default_row)

    def conditional(self, source_idx: int, prefix: Iterable[int]) -> np.ndarray:
        """The smoothed conditional at T=1."""
        return self._probs[self.row_index(source_idx, prefix)]

    def tempered(self, t: float) -> TemperedTables:
        if not t > 0.0:
            raise DomainError(f"temperature must be positive, got {t}")
        t = float(t)
        with self._lock:
            tab = self._cache.get(t)
            if tab is None:
                tab = self._cache[t] = TemperedTables(self, t)
        return tab


def build_from_spec(task: TaskSpec, lam: float) -> ConditionalLM:
    return ConditionalLM(task, lam)


def build_from_corpus(
    corpus: list[tuple[Sequence, Sequence]],
    order: int,
    lam: float,
    vocab: Vocab,
    max_len: int | None = None,
) -> ConditionalLM:
    """Relative-frequency order-``k`` model of ``corpus``, smoothed by ``lam``.

    Identical source sequences share one source index. Unseen contexts fall
    back to the uniform distribution.
    """
    if not corpus:
        raise IngestionError("corpus is empty")
    v = len(vocab)
    src_index: dict[tuple[int, ...], int] = {}
    sources: list[Sequence] = []
    refs: list[list[Sequence]] = []
    counts: dict[TableKey, np.ndarray] = {}
    bos = vocab.bos_id
    for lineno, (src, tgt) in enumerate(corpus, 1):
        for i in src.token_ids + tgt.token_ids:
            if not 0 <= i < v:
                raise IngestionError(f"pair {lineno}: token id {i} outside vocabulary")
        if not tgt.terminated:
            tgt = vocab.seq(tgt.token_ids + (vocab.eos_id,))
        s = src_index.setdefault(src.token_ids, len(sources))
        if s == len(sources):
            sources.append(src)
            refs.append([])
        if tgt not in refs[s]:
            refs[s].append(tgt)
        padded = (bos,) * order + tgt.token_ids
        for t, tok in enumerate(tgt.token_ids):
            key = (s, padded[t:t + order])
            counts.setdefault(key, np.zeros(v))[tok] += 1.0
    tables = {key: c / c.sum() for key, c in counts.items()}
    longest = max(len(r) for rs in refs for r in rs)
    task = TaskSpec(
        vocab=vocab,
        sources=tuple(sources),
        tables=tables,
        references=tuple(tuple(r) for r in refs),
        markov_order=order,
        max_len=max(longest, max_len or 0),
    )
    return ConditionalLM(task, lam)


def next_dist(model: ConditionalLM, source_idx: int, prefix: Iterable[int], t: float = 1.0) -> np.ndarray:
    """Next-token distribution after ``prefix`` at temperature ``t``."""
    if not t > 0.0:
        raise DomainError(f"temperature must be positive, got {t}")
    return apply_temperature(model.conditional(source_idx, prefix), t)


def seq_logprob(model: ConditionalLM, source_idx: int, target: Sequence, t: float = 1.0) -> float:
    """Natural-log probability of ``target`` including its EOS step.

    A capped sequence (``max_len`` tokens, no EOS) gets the probability of
    its realised prefix. Returns :data:`ZERO_PROB` only when some step has
    exactly zero probability; everything else stays finite in log space.
    """
    n = len(target)
    if n > model.max_len:
        raise DomainError(f"target of length {n} exceeds max_len {model.max_len}")
    if not target.terminated and n != model.max_len:
        raise DomainError("target must end with EOS unless it hits max_len")
    tab = model.tempered(t)
    ids = target.token_ids
    total = 0.0
    for i, tok in enumerate(ids):
        total += tab.log_lists[model.row_index(source_idx, ids[:i])][tok]
    return total


def token_entropy(dist: np.ndarray) -> float:
    """Shannon entropy in nats, with ``0 ln 0 = 0``."""
    p = np.asarray(dist, dtype=np.float64)
    nz = p[p > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def _teacher_forced_rows(model: ConditionalLM, eval_set, t: float):
    tab = model.tempered(t)
    for src, gold in eval_set:
        ids = gold.token_ids
        for i, tok in enumerate(ids):
            yield tab.probs[model.row_index(src, ids[:i])], tok


def mean_teacher_forcing_entropy(model: ConditionalLM, eval_set, t: float = 1.0) -> float:
    """Token-averaged entropy of the model along gold prefixes."""
    if not eval_set:
        raise DomainError("eval_set is empty")
    ents = [token_entropy(row) for row, _ in _teacher_forced_rows(model, eval_set, t)]
    return float(np.mean(ents))


def gold_rank(dist: np.ndarray, gold: int) -> int:
    """0-based rank of ``gold`` in ``dist`` sorted descending, ties by token index."""
    p = np.asarray(dist)
    pg = p[gold]
    return int(np.count_nonzero(p > pg) + np.count_nonzero(p[:gold] == pg))


def gold_rank_histogram(model: ConditionalLM, eval_set, bucket_edges, t: float = 1.0) -> np.ndarray:
    """Counts of teacher-forced gold-token ranks per ``[edge_i, edge_{i+1})`` bucket."""
    edges = np.asarray(bucket_edges)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise DomainError("bucket edges must be strictly increasing")
    if edges[0] > 0 or edges[-1] < model.vocab_size:
        raise DomainError(f"bucket edges must cover [0, {model.vocab_size})")
    counts = np.zeros(len(edges) - 1, dtype=np.int64)
    for row, tok in _teacher_forced_rows(model, eval_set, t):
        counts[np.searchsorted(edges, gold_rank(row, tok), side="right") - 1] += 1
    return counts
