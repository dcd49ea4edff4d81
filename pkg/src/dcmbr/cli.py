"""``dcmbr`` command line interface.

Exit codes: 0 success, 2 configuration/input error, 3 enumeration budget refused.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from .decoding import beam_search, exact_topn, sample_pool
from .errors import BudgetExceeded, DcmbrError
from .harness.config import EXPERIMENTS, ExperimentConfig, load_config, read_config_file
from .harness.experiments import run_experiment
from .harness.report import render_csv
from .harness.stats import paired_bootstrap
from .harness.synthetic import gen_synthetic_task
from .mbr import MbrConfig, exact_mbr, mbr_decode
from .model import build_from_spec, mean_teacher_forcing_entropy, seq_logprob
from .smoothing import (
    apply_temperature,
    effective_smoothing,
    equivalence_temperature,
    optimal_smoothed,
    printed_equivalence_temperature,
)
from .taskio import dumps_task, load_task
from .utility import UTILITIES, chrf, exact_match, sentence_bleu

EXIT_CONFIG = 2
EXIT_BUDGET = 3

_TEXT_METRICS = {"chrf": chrf, "sentence_bleu": sentence_bleu, "exact_match": exact_match}


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _model(args):
    task = load_task(args.task) if args.task else gen_synthetic_task(seed=args.task_seed)
    return build_from_spec(task, args.lam)


def _sources(args, model):
    return [args.source] if args.source is not None else list(range(len(model.task.sources)))


def cmd_gen_task(args):
    task = gen_synthetic_task(args.vocab_size, args.order, args.max_len, args.noise, args.seed, args.n_sources)
    _emit(dumps_task(task), args.out)


def cmd_sample(args):
    model = _model(args)
    chunks = []
    for s in _sources(args, model):
        pool = sample_pool(model, s, args.t, args.n, args.seed)
        chunks.append(pool.to_jsonl(model.vocab))
    _emit("".join(chunks), args.out)


def cmd_beam(args):
    model = _model(args)
    lines = []
    for s in _sources(args, model):
        seq = beam_search(model, s, args.beam, length_norm=args.length_norm)
        lp = seq_logprob(model, s, seq) if seq.terminated or len(seq) == model.max_len else -math.inf
        lines.append(json.dumps({"source": s, "tokens": model.vocab.decode(seq.token_ids), "logprob": lp}) + "\n")
    _emit("".join(lines), args.out)


def cmd_topn(args):
    model = _model(args)
    lines = []
    for s in _sources(args, model):
        res = exact_topn(model, s, args.n)
        for rank, ((seq, p), lp) in enumerate(zip(res.entries, res.logprobs)):
            lines.append(json.dumps({"source": s, "rank": rank, "tokens": model.vocab.decode(seq.token_ids),
                                     "prob": p, "logprob": lp}) + "\n")
        if res.exhausted:
            logging.warning("source %d: only %d complete sequences exist", s, len(res.entries))
    _emit("".join(lines), args.out)


_MBR_KEYS = ("n_hyp", "n_ref", "t_hyp", "t_ref", "utility", "seed", "share_pools", "exclude_self")


def cmd_mbr(args):
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
        for key in ("task", "lam", "source"):
            if key in values and getattr(args, key) in (None, 0.0):
                setattr(args, key, values.pop(key))
    if args.preset == "dc":
        values.update(t_hyp=0.5, t_ref=0.5, share_pools=True)
    elif args.preset == "naive":
        values.update(t_hyp=1.0, t_ref=1.0, share_pools=True)
    for key in _MBR_KEYS:
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    unknown = set(values) - set(_MBR_KEYS)
    if unknown:
        raise DcmbrError(f"unknown mbr config keys {sorted(unknown)}")
    config = MbrConfig(**values)
    model = _model(args)
    lines = []
    vocab = model.vocab
    for s in _sources(args, model):
        d = mbr_decode(model, s, config)
        lines.append(json.dumps({
            "type": "decision", "source": s, "tokens": vocab.decode(d.chosen.token_ids),
            "index": d.chosen_index, "mu_hat": d.mu_hat, "utility_calls": d.utility_calls,
            "config": config.to_dict(),
        }) + "\n")
        for it, score in zip(d.hyp_pool, d.scores):
            lines.append(json.dumps({"type": "score", "source": s, "index": it.index,
                                     "tokens": vocab.decode(it.sequence.token_ids),
                                     "mu_hat": float(score)}) + "\n")
        if args.exact:
            ex = exact_mbr(model, s, config.utility)
            lines.append(json.dumps({"type": "exact", "source": s, "tokens": vocab.decode(ex.sequence.token_ids),
                                     "mu": ex.mu}) + "\n")
    _emit("".join(lines), args.out)


def _read_lines(path):
    return [line.split() for line in Path(path).read_text(encoding="utf-8").splitlines()]


def cmd_score(args):
    metric = _TEXT_METRICS[args.metric]
    hyps, refs = _read_lines(args.hyp), _read_lines(args.ref)
    rows = []
    if args.mode == "pairwise":
        rows = [(i, j, metric(h, r)) for i, h in enumerate(hyps) for j, r in enumerate(refs)]
    else:
        if len(hyps) != len(refs):
            raise DcmbrError("corpus mode needs equally many hypotheses and references")
        rows = [(i, i, metric(h, r)) for i, (h, r) in enumerate(zip(hyps, refs))]
        rows.append(("corpus", "corpus", sum(v for *_, v in rows) / len(rows)))
    out = [["hyp_id", "ref_id", "metric", "value"]] + [[i, j, args.metric, repr(float(v))] for i, j, v in rows]
    text = "".join(",".join(map(str, r)) + "\n" for r in out)
    _emit(text, args.out)


def cmd_equiv(args):
    v = args.vocab_size
    t = equivalence_temperature(args.lambda1, args.lambda2, v)
    target = optimal_smoothed(0, args.lambda2, v)
    src = optimal_smoothed(0, args.lambda1, v)
    err = float(abs(apply_temperature(src, t) - target).max())
    t_printed = printed_equivalence_temperature(args.lambda1, args.lambda2)
    err_printed = float(abs(apply_temperature(src, t_printed) - target).max()) if t_printed > 0 else math.inf
    back = effective_smoothing(args.lambda1, t, v)
    _emit(
        f"temperature={t!r}\nlinf_error={err!r}\nroundtrip_lambda2={back!r}\n"
        f"printed_formula_temperature={t_printed!r}\nprinted_formula_linf_error={err_printed!r}\n",
        args.out,
    )


def cmd_entropy(args):
    model = _model(args)
    ev = model.task.eval_set()
    if args.source is not None:
        ev = [e for e in ev if e[0] == args.source]
    _emit(f"{mean_teacher_forcing_entropy(model, ev, args.t)!r}\n", args.out)


def cmd_experiment(args):
    overrides = {"seed": args.seed, "workers": args.workers, "out": args.out}
    if args.config:
        cfg = load_config(args.config, args.id, **overrides)
    else:
        cfg = ExperimentConfig.for_experiment(args.id, **overrides)
    result = run_experiment(cfg)
    _emit(render_csv(cfg.experiment, result.rows), cfg.out)
    for key, value in result.summary.items():
        print(f"{key}={value}", file=sys.stderr)
    print(f"runtime_seconds={result.seconds:.3f}", file=sys.stderr)


def cmd_bootstrap(args):
    metric = _TEXT_METRICS[args.metric]
    res = paired_bootstrap(_read_lines(args.hyps_a), _read_lines(args.hyps_b), _read_lines(args.refs),
                           metric, args.resamples, args.seed)
    _emit(
        f"mean_a={res.mean_a!r}\nmean_b={res.mean_b!r}\n"
        f"p_b_better={res.p_b_better!r}\np_a_better={res.p_a_better!r}\nresamples={res.resamples}\n",
        args.out,
    )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", help="output file (default stdout)")

    model_opts = argparse.ArgumentParser(add_help=False)
    model_opts.add_argument("--task", help="TaskSpec TOML file (default: synthetic task)")
    model_opts.add_argument("--task-seed", type=int, default=0)
    model_opts.add_argument("--lambda", dest="lam", type=float, default=0.0, help="label smoothing factor")
    model_opts.add_argument("--source", type=int, default=None, help="source index (default: all)")

    p = argparse.ArgumentParser(prog="dcmbr", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("gen-task", parents=[common], help="write a synthetic TaskSpec")
    g.add_argument("--vocab-size", type=int, default=12)
    g.add_argument("--order", type=int, default=1)
    g.add_argument("--max-len", type=int, default=12)
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--n-sources", type=int, default=20)
    g.set_defaults(func=cmd_gen_task, seed=0)

    s = sub.add_parser("sample", parents=[common, model_opts], help="ancestral sampling to JSONL")
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--n", type=int, default=10)
    s.set_defaults(func=cmd_sample)

    b = sub.add_parser("beam-decode", parents=[common, model_opts], help="beam search")
    b.add_argument("--beam", type=int, default=5)
    b.add_argument("--length-norm", action="store_true")
    b.set_defaults(func=cmd_beam)

    t = sub.add_parser("exact-topn", parents=[common, model_opts], help="exact N most probable sequences")
    t.add_argument("--n", type=int, default=20)
    t.set_defaults(func=cmd_topn)

    m = sub.add_parser("mbr-decode", parents=[common, model_opts], help="sampling-based (DC-)MBR")
    m.add_argument("--preset", choices=("naive", "dc"), help="naive: T=1 shared pool; dc: T=0.5 shared pool")
    m.add_argument("--n-hyp", type=int)
    m.add_argument("--n-ref", type=int)
    m.add_argument("--t-hyp", type=float)
    m.add_argument("--t-ref", type=float)
    m.add_argument("--utility", choices=UTILITIES)
    m.add_argument("--share-pools", action=argparse.BooleanOptionalAction, default=None)
    m.add_argument("--exclude-self", action=argparse.BooleanOptionalAction, default=None)
    m.add_argument("--exact", action="store_true", help="also report the exact-expectation MBR answer")
    m.set_defaults(func=cmd_mbr)

    sc = sub.add_parser("score", parents=[common], help="score tokenised hypothesis/reference files")
    sc.add_argument("--hyp", required=True)
    sc.add_argument("--ref", required=True)
    sc.add_argument("--metric", choices=UTILITIES, default="chrf")
    sc.add_argument("--mode", choices=("pairwise", "corpus"), default="corpus")
    sc.set_defaults(func=cmd_score)

    e = sub.add_parser("equiv-temp", parents=[common], help="temperature mapping one smoothing factor to another")
    e.add_argument("--lambda1", type=float, required=True)
    e.add_argument("--lambda2", type=float, required=True)
    e.add_argument("--vocab-size", type=int, required=True)
    e.set_defaults(func=cmd_equiv)

    en = sub.add_parser("entropy", parents=[common, model_opts], help="mean teacher-forcing entropy")
    en.add_argument("--t", type=float, default=1.0)
    en.set_defaults(func=cmd_entropy)

    x = sub.add_parser("experiment", parents=[common], help="run an experiment and write its CSV report")
    x.add_argument("id", choices=EXPERIMENTS)
    x.add_argument("--workers", type=int, default=None)
    x.set_defaults(func=cmd_experiment)

    bs = sub.add_parser("bootstrap", parents=[common], help="paired bootstrap significance test")
    bs.add_argument("--hyps-a", required=True)
    bs.add_argument("--hyps-b", required=True)
    bs.add_argument("--refs", required=True)
    bs.add_argument("--metric", choices=UTILITIES, default="sentence_bleu")
    bs.add_argument("--resamples", type=int, default=1000)
    bs.set_defaults(func=cmd_bootstrap)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.verb in ("sample", "bootstrap") and args.seed is None:
        args.seed = 0
    try:
        args.func(args)
    except BudgetExceeded as exc:
        print(f"dcmbr: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (DcmbrError, ValueError, OSError) as exc:
        print(f"dcmbr: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
