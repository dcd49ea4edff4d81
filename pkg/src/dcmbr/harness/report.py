"""Report schemas and the CSV/JSONL writers."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from ..errors import ConfigError

SCHEMAS: dict[str, tuple[str, ...]] = {
    "quality-vs-lambda": (
        "experiment", "lambda", "decoder", "beam_width", "t_hyp", "t_ref", "n", "n_seeds", "metric", "quality",
    ),
    "rank-histogram": ("experiment", "lambda", "t", "bucket_lo", "bucket_hi", "count"),
    "topn-quality": ("experiment", "lambda", "source", "rank", "prob", "metric", "quality", "is_gold"),
    "entropy-correlation": ("experiment", "lambda", "t", "n", "n_seeds", "entropy", "metric", "quality"),
    "n-sweep": ("experiment", "lambda", "t", "n", "n_seeds", "metric", "quality"),
    "temp-grid": (
        "experiment", "panel", "lambda", "t_hyp", "t_ref", "n", "n_seeds", "metric", "quality", "diversity",
    ),
    "utility-grid": ("experiment", "lambda", "utility", "metric", "decoder", "quality", "best_for_metric"),
    "collapse": ("experiment", "lambda", "length", "gold_seq_prob", "model_seq_prob"),
}


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def validate_rows(experiment: str, rows: list[dict]) -> tuple[str, ...]:
    columns = SCHEMAS[experiment]
    for i, row in enumerate(rows):
        if tuple(row) != columns:
            raise ConfigError(f"row {i} of {experiment!r} does not match schema {columns}: {tuple(row)}")
    return columns


def render_csv(experiment: str, rows: list[dict]) -> str:
    columns = validate_rows(experiment, rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(experiment: str, rows: list[dict], path) -> None:
    Path(path).write_text(render_csv(experiment, rows), encoding="utf-8")


def write_jsonl(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
