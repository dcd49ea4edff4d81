"""Candidate generation: ancestral sampling, beam search, exact top-N search.

Random streams
--------------
Sample ``i`` of a pool seeded with ``seed`` reads its uniforms from numpy's
Philox4x64-10 counter-based generator keyed by
``SeedSequence(seed, spawn_key=(i,))``. Each draw consumes exactly
``max_len`` uniforms up front (step ``t`` uses the ``t``-th one), so a
candidate depends only on ``(model, source, T, seed, i)``: never on pool
size, worker count or scheduling. Reusing a seed at another temperature
reuses the same uniforms (common random numbers).
"""

from __future__ import annotations

import heapq
import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import BudgetExceeded, DomainError
from .model import ConditionalLM, Sequence, Vocab


def stream(seed: int, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def derive_seed(seed: int, *keys: int) -> int:
    """Stable 63-bit child seed for ``(seed, *keys)``."""
    state = np.random.SeedSequence(seed, spawn_key=tuple(keys)).generate_state(2, np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


@dataclass(frozen=True)
class PoolItem:
    sequence: Sequence
    index: int
    logprob: float


@dataclass(frozen=True)
class CandidatePool:
    items: tuple[PoolItem, ...]
    temperature: float
    seed: int

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[PoolItem]:
        return iter(self.items)

    @property
    def sequences(self) -> list[Sequence]:
        return [it.sequence for it in self.items]

    def to_jsonl(self, vocab: Vocab) -> str:
        return "".join(
            json.dumps({
                "index": it.index,
                "tokens": vocab.decode(it.sequence.token_ids),
                "terminated": it.sequence.terminated,
                "logprob": it.logprob,
            }) + "\n"
            for it in self.items
        )


def _draw(model: ConditionalLM, tab, source_idx: int, uniforms, max_len: int) -> tuple[Sequence, float]:
    k = model.task.markov_order
    eos = model.vocab.eos_id
    ctx = (model.vocab.bos_id,) * k
    ids: list[int] = []
    lp = 0.0
    for step in range(max_len):
        r = model.row_for_context(source_idx, ctx)
        tok = bisect_right(tab.cdf_lists[r], uniforms[step])
        if tok > tab.last_positive[r]:
            tok = tab.last_positive[r]
        lp += tab.log_lists[r][tok]
        ids.append(tok)
        if tok == eos:
            break
        if k:
            ctx = ctx[1:] + (tok,)
    return Sequence(tuple(ids), ids[-1] == eos), lp


def _check_t(t: float) -> None:
    if not t > 0.0:
        raise DomainError(f"temperature must be positive, got {t}")


def ancestral_sample(
    model: ConditionalLM,
    source_idx: int,
    t: float,
    seed: int,
    max_len: int | None = None,
    *,
    index: int = 0,
) -> Sequence:
    """One left-to-right draw at temperature ``t``; stops at EOS or ``max_len``."""
    _check_t(t)
    max_len = max_len or model.max_len
    u = stream(seed, index).random(max_len)
    return _draw(model, model.tempered(t), source_idx, u, max_len)[0]


def sample_pool(
    model: ConditionalLM,
    source_idx: int,
    t: float,
    n: int,
    seed: int,
    max_len: int | None = None,
) -> CandidatePool:
    """``n`` independent draws; duplicates are kept."""
    _check_t(t)
    if n < 1:
        raise DomainError("pool size must be at least 1")
    max_len = max_len or model.max_len
    tab = model.tempered(t)
    items = []
    for i in range(n):
        seq, lp = _draw(model, tab, source_idx, stream(seed, i).random(max_len), max_len)
        items.append(PoolItem(seq, i, lp))
    return CandidatePool(tuple(items), float(t), seed)


def beam_search(
    model: ConditionalLM,
    source_idx: int,
    beam_width: int,
    max_len: int | None = None,
    *,
    t: float = 1.0,
    length_norm: bool = False,
) -> Sequence:
    """Length-unnormalised beam search over ``log next_dist``.

    Candidates are ranked by score, then token ids. A candidate that emits
    EOS leaves the beam and joins the finished set; search stops when no
    live hypothesis can still beat the best finished one. If nothing
    finishes within ``max_len`` the best capped hypothesis is returned.
    """
    if beam_width < 1:
        raise DomainError("beam width must be at least 1")
    max_len = max_len or model.max_len
    tab = model.tempered(t)
    eos = model.vocab.eos_id

    def score(lp, ids):
        return lp / len(ids) if length_norm else lp

    alive: list[tuple[float, tuple[int, ...]]] = [(0.0, ())]
    finished: list[tuple[float, tuple[int, ...]]] = []
    for _ in range(max_len):
        cands = []
        for lp, ids in alive:
            logs = tab.log_lists[model.row_index(source_idx, ids)]
            for tok, l in enumerate(logs):
                if l != -math.inf:
                    cands.append((lp + l, ids + (tok,)))
        cands.sort(key=lambda c: (-score(*c), c[1]))
        alive = []
        for lp, ids in cands[:beam_width]:
            (finished if ids[-1] == eos else alive).append((lp, ids))
        if not alive:
            break
        if finished and not length_norm:
            if max(lp for lp, _ in finished) > alive[0][0]:
                break
    pool = finished or alive
    lp, ids = min(pool, key=lambda c: (-score(*c), c[1]))
    return Sequence(ids, ids[-1] == eos)


@dataclass(frozen=True)
class TopNResult:
    entries: list[tuple[Sequence, float]]
    logprobs: list[float]
    n_requested: int
    exhausted: bool
    expansions: int


class _Ranked:
    """Heap entry; the heap root is the entry ranked last by (-logprob, ids)."""

    __slots__ = ("lp", "ids")

    def __init__(self, lp, ids):
        self.lp = lp
        self.ids = ids

    def __lt__(self, other):
        return (self.lp, other.ids) < (other.lp, self.ids)


def exact_topn(
    model: ConditionalLM,
    source_idx: int,
    n: int,
    max_len: int | None = None,
    *,
    t: float = 1.0,
    prune: bool = True,
    include_capped: bool = False,
) -> TopNResult:
    """The ``n`` most probable complete sequences, found exactly.

    Depth-first search expands children in descending probability and keeps
    the best ``n`` complete sequences in a min-heap. A prefix is cut once it
    cannot outrank the heap root: its log-probability is lower, or equal with
    every extension sorting after the root lexicographically. Extensions
    never gain probability, so the cut is sound.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    max_len = max_len or model.max_len
    tab = model.tempered(t)
    eos = model.vocab.eos_id
    order_cache: dict[int, list[int]] = {}
    heap: list[_Ranked] = []
    expansions = 0

    def offer(lp, ids):
        if len(heap) < n:
            heapq.heappush(heap, _Ranked(lp, ids))
        else:
            w = heap[0]
            if lp > w.lp or (lp == w.lp and ids < w.ids):
                heapq.heapreplace(heap, _Ranked(lp, ids))

    def hopeless(lp, ids):
        if not prune or len(heap) < n:
            return False
        w = heap[0]
        return lp < w.lp or (lp == w.lp and ids > w.ids[: len(ids)])

    stack: list[tuple[float, tuple[int, ...]]] = [(0.0, ())]
    while stack:
        lp, ids = stack.pop()
        if hopeless(lp, ids):
            continue
        expansions += 1
        r = model.row_index(source_idx, ids)
        logs = tab.log_lists[r]
        order = order_cache.get(r)
        if order is None:
            order = sorted((i for i, l in enumerate(logs) if l != -math.inf), key=lambda i: (-logs[i], i))
            order_cache[r] = order
        # reversed so the most probable child is popped first
        for tok in reversed(order):
            clp = lp + logs[tok]
            cids = ids + (tok,)
            if tok == eos:
                offer(clp, cids)
            elif len(cids) >= max_len:
                if include_capped:
                    offer(clp, cids)
            elif not hopeless(clp, cids):
                stack.append((clp, cids))

    ranked = sorted(heap, key=lambda e: (-e.lp, e.ids))
    return TopNResult(
        entries=[(Sequence(e.ids, e.ids[-1] == eos), math.exp(e.lp)) for e in ranked],
        logprobs=[e.lp for e in ranked],
        n_requested=n,
        exhausted=len(ranked) < n,
        expansions=expansions,
    )


def space_size(vocab_size: int, max_len: int, include_capped: bool = True) -> int:
    """Number of distinct sequences of at most ``max_len`` tokens."""
    body = vocab_size - 1
    total = sum(body ** (length - 1) for length in range(1, max_len + 1))
    return total + (body ** max_len if include_capped else 0)


def enumerate_sequences(
    model: ConditionalLM,
    source_idx: int,
    max_len: int | None = None,
    *,
    t: float = 1.0,
    include_capped: bool = True,
    budget: int = 200_000,
) -> list[tuple[Sequence, float]]:
    """Every sequence of non-zero probability with its log-probability.

    Refuses with :class:`BudgetExceeded` when the full sequence space is
    larger than ``budget``.
    """
    max_len = max_len or model.max_len
    need = space_size(model.vocab_size, max_len, include_capped)
    if need > budget:
        raise BudgetExceeded(need, budget)
    tab = model.tempered(t)
    eos = model.vocab.eos_id
    out = []
    stack = [(0.0, ())]
    while stack:
        lp, ids = stack.pop()
        logs = tab.log_lists[model.row_index(source_idx, ids)]
        for tok in range(len(logs) - 1, -1, -1):
            if logs[tok] == -math.inf:
                continue
            clp, cids = lp + logs[tok], ids + (tok,)
            if tok == eos:
                out.append((Sequence(cids, True), clp))
            elif len(cids) >= max_len:
                if include_capped:
                    out.append((Sequence(cids, False), clp))
            else:
                stack.append((clp, cids))
    out.sort(key=lambda e: (-e[1], e[0].token_ids))
    return out
