"""Sampling-based MBR and DC-MBR, plus an exact-expectation oracle."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .decoding import CandidatePool, derive_seed, enumerate_sequences, exact_topn, sample_pool
from .errors import ConfigError
from .model import ConditionalLM, Sequence
from .utility import UTILITIES, UtilityFn, get_utility

# seed offset of the reference pool when pools are not shared
REF_STREAM = 1


@dataclass(frozen=True)
class MbrConfig:
    n_hyp: int = 10
    n_ref: int = 10
    t_hyp: float = 1.0
    t_ref: float = 1.0
    utility: str = "chrf"
    seed: int = 0
    share_pools: bool = True
    exclude_self: bool = False

    def __post_init__(self):
        if self.n_hyp < 1 or self.n_ref < 1:
            raise ConfigError("n_hyp and n_ref must be positive")
        if not (self.t_hyp > 0 and self.t_ref > 0):
            raise ConfigError("temperatures must be positive")
        if self.utility not in UTILITIES:
            raise ConfigError(f"unknown utility {self.utility!r}")
        if self.share_pools and (self.t_hyp != self.t_ref or self.n_hyp != self.n_ref):
            raise ConfigError("share_pools needs t_hyp == t_ref and n_hyp == n_ref")
        if self.exclude_self and not self.share_pools:
            raise ConfigError("exclude_self only applies to a shared pool")

    @classmethod
    def naive(cls, n: int, seed: int = 0, utility: str = "chrf") -> "MbrConfig":
        """Unbiased MBR: one pool at T=1 used as hypotheses and references."""
        return cls(n, n, 1.0, 1.0, utility, seed, True)

    @classmethod
    def cooled(cls, n: int, t: float = 0.5, seed: int = 0, utility: str = "chrf") -> "MbrConfig":
        """DC-MBR with one shared pool sampled at temperature ``t``."""
        return cls(n, n, t, t, utility, seed, True)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MbrDecision:
    chosen: Sequence
    chosen_index: int
    mu_hat: float
    scores: np.ndarray
    # entries of the n_hyp x n_ref utility matrix (the cost model)
    utility_calls: int
    # distinct (hyp, ref) pairs actually evaluated
    unique_utility_calls: int
    hyp_pool: CandidatePool = field(repr=False)
    ref_pool: CandidatePool = field(repr=False)


def expected_utility(h: Sequence, refs, utility) -> float:
    """Mean ``utility(h, r)`` over ``refs``, summed in index order."""
    seqs = [getattr(r, "sequence", r) for r in refs]
    if not seqs:
        raise ConfigError("reference pool is empty")
    total = 0.0
    for r in seqs:
        total += utility(h, r)
    return total / len(seqs)


def _unique(seqs):
    index: dict[Sequence, int] = {}
    inverse = [index.setdefault(s, len(index)) for s in seqs]
    return list(index), np.asarray(inverse, dtype=np.intp)


def utility_matrix(hyps, refs, utility) -> tuple[np.ndarray, int]:
    """Full ``len(hyps) x len(refs)`` matrix, evaluating each distinct pair once."""
    uh, hinv = _unique(hyps)
    ur, rinv = _unique(refs)
    small = np.empty((len(uh), len(ur)))
    for i, h in enumerate(uh):
        for j, r in enumerate(ur):
            small[i, j] = utility(h, r)
    return small[np.ix_(hinv, rinv)], small.size


def mbr_decode(model: ConditionalLM, source_idx: int, config: MbrConfig) -> MbrDecision:
    """Pick the hypothesis with the highest mean utility against the references.

    Ties go to the lowest hypothesis index. With ``T_h = T_r = 1`` and a
    shared pool this is plain sampling-based MBR.
    """
    utility = get_utility(config.utility, model.vocab)
    hyp_pool = sample_pool(model, source_idx, config.t_hyp, config.n_hyp, config.seed)
    if config.share_pools:
        ref_pool = hyp_pool
    else:
        ref_seed = derive_seed(config.seed, REF_STREAM)
        ref_pool = sample_pool(model, source_idx, config.t_ref, config.n_ref, ref_seed)
    mat, unique_calls = utility_matrix(hyp_pool.sequences, ref_pool.sequences, utility)
    acc = np.zeros(mat.shape[0])
    for j in range(mat.shape[1]):
        acc += mat[:, j]
    if config.exclude_self and len(hyp_pool) > 1:
        scores = (acc - np.diagonal(mat)) / (mat.shape[1] - 1)
    else:
        scores = acc / mat.shape[1]
    best = int(np.argmax(scores))
    return MbrDecision(
        chosen=hyp_pool.items[best].sequence,
        chosen_index=best,
        mu_hat=float(scores[best]),
        scores=scores,
        utility_calls=mat.size,
        unique_utility_calls=unique_calls,
        hyp_pool=hyp_pool,
        ref_pool=ref_pool,
    )


@dataclass(frozen=True)
class ExactMbr:
    sequence: Sequence
    mu: float


def exact_mbr(
    model: ConditionalLM,
    source_idx: int,
    utility: UtilityFn | str,
    max_len: int | None = None,
    *,
    budget: int = 4096,
    t: float = 1.0,
) -> ExactMbr:
    """MBR under the exact model distribution (capped sequences included).

    For exact-match utility the expected utility of ``h`` is its own
    probability, so the answer is the mode and is found by exact search with
    no size limit. Other utilities enumerate the whole sequence space and
    refuse (:class:`~dcmbr.errors.BudgetExceeded`) past ``budget``.
    Ties go to the lexicographically smallest token ids.
    """
    if isinstance(utility, str):
        utility = get_utility(utility, model.vocab)
    if utility.kind == "exact_match":
        top = exact_topn(model, source_idx, 1, max_len, t=t, include_capped=True)
        seq, prob = top.entries[0]
        return ExactMbr(seq, prob)
    space = enumerate_sequences(model, source_idx, max_len, t=t, budget=budget)
    seqs = [s for s, _ in space]
    probs = [math.exp(lp) for _, lp in space]
    best = None
    for h in seqs:
        mu = 0.0
        for r, p in zip(seqs, probs):
            mu += p * utility(h, r)
        if best is None or mu > best[0] or (mu == best[0] and h.token_ids < best[1].token_ids):
            best = (mu, h)
    return ExactMbr(best[1], best[0])
