"""Desk-scale experiment runners.

Every runner is a pure function of its :class:`ExperimentConfig`: work is
split into per-(sweep point, source) units, each unit derives its own seeds
from ``cfg.seed``, and results are reduced in a fixed order. The report is
therefore identical for any number of workers.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..decoding import beam_search, derive_seed, exact_topn, sample_pool
from ..mbr import MbrConfig, mbr_decode
from ..model import (
    ConditionalLM,
    Sequence,
    TaskSpec,
    Vocab,
    build_from_spec,
    gold_rank_histogram,
    mean_teacher_forcing_entropy,
    seq_logprob,
)
from ..taskio import load_task
from ..utility import UTILITIES, diversity, get_utility
from .config import ExperimentConfig
from .report import validate_rows
from .stats import collapse_table, kendall_tau
from .synthetic import gen_synthetic_task, perturb_task

log = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    experiment: str
    rows: list[dict]
    summary: dict = field(default_factory=dict)
    seconds: float = 0.0


def _task_key(cfg: ExperimentConfig) -> tuple:
    return (cfg.task_file, cfg.vocab_size, cfg.markov_order, cfg.max_len, cfg.noise, cfg.task_seed, cfg.n_sources)


@lru_cache(maxsize=8)
def _task(key: tuple) -> TaskSpec:
    task_file, vocab_size, order, max_len, noise, task_seed, n_sources = key
    if task_file is not None:
        return load_task(task_file)
    return gen_synthetic_task(vocab_size, order, max_len, noise, task_seed, n_sources)


@lru_cache(maxsize=32)
def _model(key: tuple, lam: float) -> ConditionalLM:
    return build_from_spec(_task(key), lam)


def task_for(cfg: ExperimentConfig) -> TaskSpec:
    return _task(_task_key(cfg))


def pmap(fn, items: list, workers: int = 1) -> list:
    """Ordered map, optionally across worker processes."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=chunk))


def _gold(task: TaskSpec, s: int) -> Sequence:
    return task.references[s][0]


def _mean(xs) -> float:
    return float(np.mean(xs))


# ---------------------------------------------------------------- quality vs lambda

def _unit_quality(args):
    cfg, lam, s = args
    key = _task_key(cfg)
    model, task = _model(key, lam), _task(key)
    metric = get_utility(cfg.metric, task.vocab)
    gold = _gold(task, s)
    out = {f"beam{w}": [metric(beam_search(model, s, w), gold)] for w in cfg.beam_widths}
    out["mbr"], out["dc_mbr"] = [], []
    for j in range(cfg.n_seeds):
        seed = derive_seed(cfg.seed, j, s)
        naive = MbrConfig.naive(cfg.n, seed, cfg.utility)
        cooled = MbrConfig.cooled(cfg.n, cfg.dc_temperature, seed, cfg.utility)
        out["mbr"].append(metric(mbr_decode(model, s, naive).chosen, gold))
        out["dc_mbr"].append(metric(mbr_decode(model, s, cooled).chosen, gold))
    return out


def exp_quality_vs_lambda(cfg: ExperimentConfig) -> ExperimentResult:
    task = task_for(cfg)
    n_src = len(task.sources)
    items = [(cfg, lam, s) for lam in cfg.lambdas for s in range(n_src)]
    results = pmap(_unit_quality, items, cfg.workers)
    rows = []
    for li, lam in enumerate(cfg.lambdas):
        chunk = results[li * n_src:(li + 1) * n_src]
        for w in cfg.beam_widths:
            rows.append(_qrow(cfg, lam, "beam", w, 1.0, 1.0, None, None,
                              _mean([q for r in chunk for q in r[f"beam{w}"]])))
        for dec, t in (("mbr", 1.0), ("dc_mbr", cfg.dc_temperature)):
            rows.append(_qrow(cfg, lam, dec, None, t, t, cfg.n, cfg.n_seeds,
                              _mean([q for r in chunk for q in r[dec]])))
    return ExperimentResult(cfg.experiment, rows)


def _qrow(cfg, lam, decoder, width, t_hyp, t_ref, n, n_seeds, quality):
    return {
        "experiment": cfg.experiment, "lambda": float(lam), "decoder": decoder, "beam_width": width,
        "t_hyp": float(t_hyp), "t_ref": float(t_ref), "n": n, "n_seeds": n_seeds,
        "metric": cfg.metric, "quality": quality,
    }


# ---------------------------------------------------------------- rank histogram

def exp_rank_histogram(cfg: ExperimentConfig) -> ExperimentResult:
    """Teacher-forced gold-token ranks; the task is perturbed so ranks vary."""
    base = task_for(cfg)
    task = perturb_task(base, cfg.rank_perturb, derive_seed(cfg.seed, 0)) if cfg.rank_perturb else base
    v = task.vocab_size
    edges = tuple(e for e in cfg.rank_edges if e < v) + (v,)
    rows = []
    for lam in cfg.lambdas:
        model = build_from_spec(task, lam)
        counts = gold_rank_histogram(model, task.eval_set(), edges)
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            rows.append({"experiment": cfg.experiment, "lambda": float(lam), "t": 1.0,
                         "bucket_lo": lo, "bucket_hi": hi, "count": int(c)})
    return ExperimentResult(cfg.experiment, rows)


# ---------------------------------------------------------------- exact top-N quality

def _unit_topn(args):
    cfg, lam, s = args
    key = _task_key(cfg)
    model, task = _model(key, lam), _task(key)
    metric = get_utility(cfg.metric, task.vocab)
    gold = _gold(task, s)
    res = exact_topn(model, s, cfg.topn)
    return [(rank, p, metric(seq, gold), seq == gold) for rank, (seq, p) in enumerate(res.entries)]


def exp_topn_quality(cfg: ExperimentConfig) -> ExperimentResult:
    n_src = len(task_for(cfg).sources)
    items = [(cfg, lam, s) for lam in cfg.lambdas for s in range(n_src)]
    rows = []
    for (_, lam, s), entries in zip(items, pmap(_unit_topn, items, cfg.workers)):
        for rank, p, q, is_gold in entries:
            rows.append({"experiment": cfg.experiment, "lambda": float(lam), "source": s, "rank": rank,
                         "prob": p, "metric": cfg.metric, "quality": q, "is_gold": is_gold})
    summary = {}
    for lam in cfg.lambdas:
        sel = [r["quality"] for r in rows if r["lambda"] == float(lam)]
        summary[f"mean_top{cfg.topn}_quality@lambda={lam}"] = _mean(sel)
    return ExperimentResult(cfg.experiment, rows, summary)


# ---------------------------------------------------------------- entropy vs MBR quality

def _unit_mbr_quality(args):
    """Mean quality over seeds of shared-pool MBR at temperature ``t``."""
    cfg, lam, t, n, s = args
    key = _task_key(cfg)
    model, task = _model(key, lam), _task(key)
    metric = get_utility(cfg.metric, task.vocab)
    gold = _gold(task, s)
    return [
        metric(mbr_decode(model, s, MbrConfig.cooled(n, t, derive_seed(cfg.seed, j, s), cfg.utility)).chosen, gold)
        for j in range(cfg.n_seeds)
    ]


def exp_entropy_correlation(cfg: ExperimentConfig) -> ExperimentResult:
    task = task_for(cfg)
    n_src = len(task.sources)
    points = [(lam, t) for lam in cfg.lambdas for t in cfg.temperatures]
    items = [(cfg, lam, t, cfg.n, s) for lam, t in points for s in range(n_src)]
    results = pmap(_unit_mbr_quality, items, cfg.workers)
    rows, ents, quals = [], [], []
    for i, (lam, t) in enumerate(points):
        model = _model(_task_key(cfg), lam)
        ent = mean_teacher_forcing_entropy(model, task.eval_set(), t)
        q = _mean([x for r in results[i * n_src:(i + 1) * n_src] for x in r])
        ents.append(ent)
        quals.append(q)
        rows.append({"experiment": cfg.experiment, "lambda": float(lam), "t": float(t), "n": cfg.n,
                     "n_seeds": cfg.n_seeds, "entropy": ent, "metric": cfg.metric, "quality": q})
    tau = kendall_tau(ents, quals) if len(points) >= 2 else float("nan")
    return ExperimentResult(cfg.experiment, rows, {"kendall_tau": tau, "points": len(points)})


# ---------------------------------------------------------------- quality vs number of candidates

def exp_n_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    n_src = len(task_for(cfg).sources)
    points = [(lam, t, n) for lam in cfg.lambdas for t in cfg.temperatures for n in cfg.n_values]
    items = [(cfg, lam, t, n, s) for lam, t, n in points for s in range(n_src)]
    results = pmap(_unit_mbr_quality, items, cfg.workers)
    rows = []
    for i, (lam, t, n) in enumerate(points):
        q = _mean([x for r in results[i * n_src:(i + 1) * n_src] for x in r])
        rows.append({"experiment": cfg.experiment, "lambda": float(lam), "t": float(t), "n": n,
                     "n_seeds": cfg.n_seeds, "metric": cfg.metric, "quality": q})
    return ExperimentResult(cfg.experiment, rows)


# ---------------------------------------------------------------- temperature grid

def _unit_temp(args):
    cfg, lam, panel, t_hyp, t_ref, s = args
    key = _task_key(cfg)
    model, task = _model(key, lam), _task(key)
    metric = get_utility(cfg.metric, task.vocab)
    gold = _gold(task, s)
    quals, divs = [], []
    for j in range(cfg.n_seeds):
        seed = derive_seed(cfg.seed, j, s)
        if panel == "c":
            pool = sample_pool(model, s, t_hyp, cfg.n, seed)
            quals.append(_mean([metric(x, gold) for x in pool.sequences]))
            divs.append(diversity(pool, task.vocab))
        else:
            conf = MbrConfig(cfg.n, cfg.n, t_hyp, t_ref, cfg.utility, seed, share_pools=False)
            quals.append(metric(mbr_decode(model, s, conf).chosen, gold))
    return quals, divs


def exp_temp_grid(cfg: ExperimentConfig) -> ExperimentResult:
    """Panel a: fixed T_r, sweep T_h. Panel b: fixed T_h, sweep T_r.
    Panel c: pool quality and pairwise-chrF similarity against a single T."""
    n_src = len(task_for(cfg).sources)
    points = []
    for lam in cfg.lambdas:
        points += [(lam, "a", t, cfg.fixed_t_ref) for t in cfg.temperatures]
        points += [(lam, "b", cfg.fixed_t_hyp, t) for t in cfg.temperatures]
        points += [(lam, "c", t, t) for t in cfg.temperatures]
    items = [(cfg, *p, s) for p in points for s in range(n_src)]
    results = pmap(_unit_temp, items, cfg.workers)
    rows = []
    for i, (lam, panel, th, tr) in enumerate(points):
        chunk = results[i * n_src:(i + 1) * n_src]
        quals = [q for r in chunk for q in r[0]]
        divs = [d for r in chunk for d in r[1]]
        rows.append({"experiment": cfg.experiment, "panel": panel, "lambda": float(lam),
                     "t_hyp": float(th), "t_ref": float(tr), "n": cfg.n, "n_seeds": cfg.n_seeds,
                     "metric": cfg.metric, "quality": _mean(quals),
                     "diversity": _mean(divs) if divs else None})
    return ExperimentResult(cfg.experiment, rows)


# ---------------------------------------------------------------- utility x metric grid

def _unit_utility(args):
    cfg, lam, s = args
    key = _task_key(cfg)
    model, task = _model(key, lam), _task(key)
    gold = _gold(task, s)
    metrics = {m: get_utility(m, task.vocab) for m in UTILITIES}
    out = {}
    for u in UTILITIES:
        for dec in ("dc_mbr", "mbr"):
            picks = []
            for j in range(cfg.n_seeds):
                seed = derive_seed(cfg.seed, j, s)
                conf = (MbrConfig.cooled(cfg.n, cfg.dc_temperature, seed, u) if dec == "dc_mbr"
                        else MbrConfig.naive(cfg.n, seed, u))
                picks.append(mbr_decode(model, s, conf).chosen)
            for m, fn in metrics.items():
                out[(u, m, dec)] = [fn(h, gold) for h in picks]
    return out


def exp_utility_grid(cfg: ExperimentConfig) -> ExperimentResult:
    """Every utility against every evaluation metric, for DC-MBR and plain MBR.

    ``best_for_metric`` marks the utility with the top score in each
    (metric, decoder) column; the summary flags whether the matching utility
    wins every column.
    """
    n_src = len(task_for(cfg).sources)
    rows, summary = [], {}
    for lam in cfg.lambdas:
        results = pmap(_unit_utility, [(cfg, lam, s) for s in range(n_src)], cfg.workers)
        qual = {k: _mean([q for r in results for q in r[k]]) for k in results[0]}
        diagonal = True
        for m in UTILITIES:
            for dec in ("dc_mbr", "mbr"):
                best = max(qual[(u, m, dec)] for u in UTILITIES)
                diagonal &= qual[(m, m, dec)] == best
        summary[f"diagonal_dominance@lambda={lam}"] = diagonal
        for u in UTILITIES:
            for m in UTILITIES:
                for dec in ("dc_mbr", "mbr"):
                    q = qual[(u, m, dec)]
                    best = max(qual[(x, m, dec)] for x in UTILITIES)
                    rows.append({"experiment": cfg.experiment, "lambda": float(lam), "utility": u,
                                 "metric": m, "decoder": dec, "quality": q, "best_for_metric": q == best})
    return ExperimentResult(cfg.experiment, rows, summary)


# ---------------------------------------------------------------- probability collapse

def chain_task(length: int) -> TaskSpec:
    """Deterministic order-1 task whose single gold target has ``length`` steps (EOS included)."""
    v = length + 2
    vocab = Vocab(("<s>", "</s>", *(f"w{i}" for i in range(length))), 0, 1)
    gold = tuple(range(2, length + 1)) + (1,)
    tables = {}
    prev = 0
    for tok in gold:
        row = np.zeros(v)
        row[tok] = 1.0
        tables[(0, (prev,))] = row
        prev = tok
    seq = Sequence(gold, True)
    return TaskSpec(vocab, (seq,), tables, ((seq,),), 1, length)


def exp_collapse(cfg: ExperimentConfig) -> ExperimentResult:
    rows = []
    for rec in collapse_table(cfg.lambdas, cfg.lengths):
        task = chain_task(rec["length"])
        model = build_from_spec(task, rec["lambda"])
        model_prob = float(np.exp(seq_logprob(model, 0, task.references[0][0])))
        rows.append({"experiment": cfg.experiment, **rec, "model_seq_prob": model_prob})
    return ExperimentResult(cfg.experiment, rows)


RUNNERS = {
    "quality-vs-lambda": exp_quality_vs_lambda,
    "rank-histogram": exp_rank_histogram,
    "topn-quality": exp_topn_quality,
    "entropy-correlation": exp_entropy_correlation,
    "n-sweep": exp_n_sweep,
    "temp-grid": exp_temp_grid,
    "utility-grid": exp_utility_grid,
    "collapse": exp_collapse,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    start = time.perf_counter()
    result = RUNNERS[cfg.experiment](cfg)
    validate_rows(cfg.experiment, result.rows)
    result.seconds = time.perf_counter() - start
    log.info("%s: %d rows in %.2fs", cfg.experiment, len(result.rows), result.seconds)
    return result
