"""Label-smoothing algebra and temperature transforms.

All distributions are 1-d float64 numpy arrays summing to one.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import DomainError

def _check_vocab_size(vocab_size: int) -> None:
    if vocab_size < 2:
        raise DomainError(f"vocabulary size must be at least 2, got {vocab_size}")


def optimal_smoothed(gold_idx: int, lam: float, vocab_size: int) -> np.ndarray:
    """Minimiser of the label-smoothed cross-entropy for a single gold token.

    The gold entry receives ``1 - lam`` and every other entry
    ``lam / (vocab_size - 1)``.
    """
    _check_vocab_size(vocab_size)
    if not 0.0 <= lam < 1.0:
        raise DomainError(f"smoothing factor must lie in [0, 1), got {lam}")
    if not 0 <= gold_idx < vocab_size:
        raise DomainError(f"gold index {gold_idx} outside vocabulary of {vocab_size}")
    out = np.full(vocab_size, lam / (vocab_size - 1))
    out[gold_idx] = 1.0 - lam
    return out


def smooth_mixture(dist: np.ndarray, lam: float, *, warn_argmax: bool = False) -> np.ndarray:
    """Expected smoothed target when the gold token is drawn from ``dist``.

    ``(1 - lam*V/(V-1)) * p + lam/(V-1)``; on a one-hot input this is exactly
    :func:`optimal_smoothed`.
    """
    p = np.asarray(dist, dtype=np.float64)
    v = p.shape[-1]
    _check_vocab_size(v)
    if lam == 0.0:
        return p.copy()
    if warn_argmax and lam >= (v - 1) / v:
        warnings.warn(
            f"lam={lam} >= (V-1)/V={(v - 1) / v}: argmax is no longer preserved",
            stacklevel=2,
        )
    off = lam / (v - 1)
    out = (1.0 - lam * v / (v - 1)) * p + off
    # keep the one-hot case bit-exact: gold -> 1 - lam, others -> lam/(V-1)
    one_hot = p == 1.0
    if one_hot.any():
        out = np.where(one_hot, 1.0 - lam, out)
        out = np.where(p == 0.0, off, out)
    return out


def apply_temperature(dist: np.ndarray, t: float) -> np.ndarray:
    """Renormalised ``p ** (1/t)``; identical to ``softmax(log p / t)``.

    Zero entries stay zero. Computed as a max-shifted softmax in log space so
    extreme temperatures cannot overflow. Works along the last axis, so a
    stack of rows can be transformed in one call.
    """
    if not t > 0.0:
        raise DomainError(f"temperature must be positive, got {t}")
    p = np.asarray(dist, dtype=np.float64)
    if t == 1.0:
        return p.copy()
    positive = p > 0.0
    with np.errstate(divide="ignore"):
        logits = np.where(positive, np.log(np.where(positive, p, 1.0)), -np.inf) / t
    out = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return out / out.sum(axis=-1, keepdims=True)


def _log_gap(lam: float, vocab_size: int) -> float:
    """Gold/non-gold log-probability ratio of the smoothed optimum."""
    if not 0.0 < lam < 1.0:
        raise DomainError(f"smoothing factor must lie in (0, 1), got {lam}")
    gap = math.log((1.0 - lam) * (vocab_size - 1) / lam)
    if gap == 0.0:
        raise DomainError(
            f"lam={lam} equals (V-1)/V for V={vocab_size}: uniform target has no logit gap"
        )
    return gap


def equivalence_temperature(lam1: float, lam2: float, vocab_size: int) -> float:
    """Temperature that maps the ``lam1`` optimum onto the ``lam2`` optimum.

    ``T = ln[(1-l1)(V-1)/l1] / ln[(1-l2)(V-1)/l2]``.
    """
    _check_vocab_size(vocab_size)
    t = _log_gap(lam1, vocab_size) / _log_gap(lam2, vocab_size)
    if t < 0:
        raise DomainError(
            f"lam1={lam1} and lam2={lam2} lie on opposite sides of (V-1)/V; no positive temperature exists"
        )
    return t


def printed_equivalence_temperature(lam1: float, lam2: float) -> float:
    """``ln[(1-l1)/l1] / ln[(1-l2)/l2]``, the variant without the ``V-1`` factor.

    Kept only for comparison: it does not map one smoothed optimum onto the
    other unless ``V == 2`` or ``lam1 == lam2``.
    """
    return math.log((1.0 - lam1) / lam1) / math.log((1.0 - lam2) / lam2)


def effective_smoothing(lam1: float, t: float, vocab_size: int) -> float:
    """Smoothing factor whose optimum equals the ``lam1`` optimum at temperature ``t``."""
    _check_vocab_size(vocab_size)
    if not t > 0.0:
        raise DomainError(f"temperature must be positive, got {t}")
    gap = _log_gap(lam1, vocab_size) / t
    # lam2 = (V-1) / (V-1 + e^gap), evaluated stably for either sign of gap
    log_vm1 = math.log(vocab_size - 1)
    if gap > 0:
        return math.exp(log_vm1 - gap) / (1.0 + math.exp(log_vm1 - gap))
    return (vocab_size - 1) / (vocab_size - 1 + math.exp(gap))


def label_smoothed_ce(p: np.ndarray, gold_idx: int, lam: float):
    """Cross-entropy of ``p`` against the ``lam``-smoothed one-hot target (nats).

    ``p`` may be a stack of distributions along the last axis, in which case
    an array of cross-entropies is returned. The result is ``inf`` where
    ``p`` is zero but the target is positive.
    """
    p = np.asarray(p, dtype=np.float64)
    q = optimal_smoothed(gold_idx, lam, p.shape[-1])
    support = q > 0.0
    ps = p[..., support]
    with np.errstate(divide="ignore"):
        ce = -np.sum(q[support] * np.log(ps), axis=-1)
    ce = np.where(np.any(ps <= 0.0, axis=-1), math.inf, ce)
    return float(ce) if p.ndim == 1 else ce
