"""Rank correlation, bootstrap significance and the probability-collapse table."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..decoding import stream
from ..errors import DomainError


def kendall_tau(xs, ys) -> float:
    """Tie-corrected Kendall tau-b; ``nan`` when either input is constant."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise DomainError("kendall_tau needs two sequences of equal length >= 2")
    return float(stats.kendalltau(xs, ys, variant="b").statistic)


@dataclass(frozen=True)
class BootstrapResult:
    # share of resamples where B scores >= A (ties count one half)
    p_b_better: float
    p_a_better: float
    mean_a: float
    mean_b: float
    resamples: int


def paired_bootstrap(hyps_a, hyps_b, golds, metric, resamples: int = 1000, seed: int = 0) -> BootstrapResult:
    """Paired bootstrap resampling of sentence-level ``metric`` scores.

    Each resample draws sentence indices with replacement and compares the
    two systems' mean scores on the same indices.
    """
    if not (len(hyps_a) == len(hyps_b) == len(golds)):
        raise DomainError("systems and references must have equal length")
    if not golds:
        raise DomainError("empty test set")
    if resamples < 100:
        raise DomainError("at least 100 resamples are required")
    a = np.array([metric(h, g) for h, g in zip(hyps_a, golds)])
    b = np.array([metric(h, g) for h, g in zip(hyps_b, golds)])
    idx = stream(seed).integers(0, len(golds), size=(resamples, len(golds)))
    diff = b[idx].mean(axis=1) - a[idx].mean(axis=1)
    ties = np.count_nonzero(diff == 0.0)
    b_wins = np.count_nonzero(diff > 0.0)
    a_wins = resamples - ties - b_wins
    return BootstrapResult(
        p_b_better=(b_wins + 0.5 * ties) / resamples,
        p_a_better=(a_wins + 0.5 * ties) / resamples,
        mean_a=float(a.mean()),
        mean_b=float(b.mean()),
        resamples=resamples,
    )


def collapse_table(lambdas, lengths) -> list[dict]:
    """Probability ``(1 - lam) ** L`` left for a length-``L`` gold sequence."""
    return [
        {"lambda": float(lam), "length": int(n), "gold_seq_prob": (1.0 - lam) ** n}
        for lam in lambdas
        for n in lengths
    ]
