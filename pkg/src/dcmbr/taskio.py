"""TaskSpec files (TOML) and tab-separated parallel corpora.

TaskSpec schema::

    markov_order = 1            # k >= 0
    max_len = 12                # cap on target length, EOS included

    [vocab]
    tokens = ["<s>", "</s>", "a", "b"]
    bos = "<s>"
    eos = "</s>"

    [default]                   # optional; omitted means uniform
    probs = [0.25, 0.25, 0.25, 0.25]

    [[sources]]                 # one block per source, in index order
    tokens = ["x", "y"]
    references = [["a", "b", "</s>"]]

    [[tables]]                  # one block per (source, context)
    source = 0
    context = ["<s>"]           # exactly markov_order tokens
    probs = [0.0, 0.0, 1.0, 0.0]

Every ``probs`` row must have one entry per vocabulary token and sum to one
within 1e-12; the loader names the offending row otherwise. Floats are
written with ``repr`` so a save/load round trip is bit-exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .errors import DcmbrError, IngestionError
from .model import Sequence, TaskSpec, Vocab


def task_to_dict(task: TaskSpec) -> dict:
    vocab = task.vocab
    doc: dict = {
        "markov_order": task.markov_order,
        "max_len": task.max_len,
        "vocab": {
            "tokens": list(vocab.tokens),
            "bos": vocab.tokens[vocab.bos_id],
            "eos": vocab.tokens[vocab.eos_id],
        },
    }
    if task.default is not None:
        doc["default"] = {"probs": [float(x) for x in task.default]}
    doc["sources"] = [
        {
            "tokens": vocab.decode(src.token_ids),
            "references": [vocab.decode(r.token_ids) for r in refs],
        }
        for src, refs in zip(task.sources, task.references)
    ]
    doc["tables"] = [
        {"source": s, "context": vocab.decode(ctx), "probs": [float(x) for x in row]}
        for (s, ctx), row in sorted(task.tables.items())
    ]
    return doc


def task_from_dict(doc: dict) -> TaskSpec:
    try:
        v = doc["vocab"]
        vocab = Vocab(tuple(v["tokens"]), v["tokens"].index(v["bos"]), v["tokens"].index(v["eos"]))
        sources, refs = [], []
        for i, block in enumerate(doc.get("sources", [])):
            try:
                sources.append(vocab.seq(vocab.encode(block["tokens"])))
                refs.append(tuple(vocab.seq(vocab.encode(r)) for r in block.get("references", [])))
            except DcmbrError as exc:
                raise IngestionError(f"sources[{i}]: {exc}") from None
        tables = {}
        for i, block in enumerate(doc.get("tables", [])):
            probs = np.asarray(block["probs"], dtype=np.float64)
            if probs.shape != (len(vocab),):
                raise IngestionError(f"tables[{i}]: expected {len(vocab)} probabilities, got {probs.size}")
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
                raise IngestionError(f"tables[{i}]: row is not normalised (sum={probs.sum()!r})")
            try:
                ctx = vocab.encode(block["context"])
            except DcmbrError as exc:
                raise IngestionError(f"tables[{i}]: {exc}") from None
            tables[(int(block["source"]), ctx)] = probs
        default = doc.get("default", {}).get("probs")
        return TaskSpec(
            vocab=vocab,
            sources=tuple(sources),
            tables=tables,
            references=tuple(refs),
            markov_order=int(doc["markov_order"]),
            max_len=int(doc["max_len"]),
            default=None if default is None else np.asarray(default, dtype=np.float64),
        )
    except IngestionError:
        raise
    except KeyError as exc:
        raise IngestionError(f"missing key {exc}") from None
    except ValueError as exc:
        raise IngestionError(str(exc)) from None


def save_task(task: TaskSpec, path) -> None:
    Path(path).write_bytes(tomli_w.dumps(task_to_dict(task)).encode("utf-8"))


def dumps_task(task: TaskSpec) -> str:
    return tomli_w.dumps(task_to_dict(task))


def load_task(path) -> TaskSpec:
    try:
        doc = tomli.loads(Path(path).read_text(encoding="utf-8"))
    except tomli.TOMLDecodeError as exc:
        raise IngestionError(f"{path}: {exc}") from None
    return task_from_dict(doc)


def read_corpus(path, vocab: Vocab | None = None) -> tuple[list[tuple[Sequence, Sequence]], Vocab]:
    """Parse ``source<TAB>target`` lines of whitespace-separated tokens.

    Without ``vocab`` one is built from the corpus (plus ``<s>``/``</s>``).
    EOS is appended to targets that lack it.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    rows = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        if line.count("\t") != 1:
            raise IngestionError(f"line {lineno}: expected exactly one TAB")
        src, tgt = line.split("\t")
        rows.append((lineno, src.split(), tgt.split()))
    if vocab is None:
        vocab = Vocab.build(tok for _, s, t in rows for tok in s + t)
    eos = vocab.tokens[vocab.eos_id]
    corpus = []
    for lineno, src, tgt in rows:
        for tok in src + tgt:
            if tok not in vocab:
                raise IngestionError(f"line {lineno}: unknown token {tok!r}")
        if not tgt or tgt[-1] != eos:
            tgt = tgt + [eos]
        try:
            corpus.append((vocab.seq(vocab.encode(src)), vocab.seq(vocab.encode(tgt))))
        except DcmbrError as exc:
            raise IngestionError(f"line {lineno}: {exc}") from None
    return corpus, vocab
