import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dcmbr.model import Sequence, TaskSpec, Vocab  # noqa: E402
from dcmbr.harness.synthetic import gen_synthetic_task  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def one_step_task(vocab_size=10, gold=2):
    """Deterministic task whose only gold target is ``gold EOS``."""
    toks = ("<s>", "</s>") + tuple(f"t{i}" for i in range(vocab_size - 2))
    vocab = Vocab(toks, 0, 1)
    tables = {}
    for ctx, nxt in (((0,), gold), ((gold,), 1)):
        row = np.zeros(vocab_size)
        row[nxt] = 1.0
        tables[(0, ctx)] = row
    ref = Sequence((gold, 1), True)
    return TaskSpec(vocab, (Sequence((2, 1), True),), tables, ((ref,),), 1, 4)


def two_sequence_task(p_a=0.9):
    """From BOS choose ``a`` (prob ``p_a``) or ``b``, then EOS."""
    vocab = Vocab(("<s>", "</s>", "a", "b"), 0, 1)
    tables = {
        (0, (0,)): np.array([0.0, 0.0, p_a, 1.0 - p_a]),
        (0, (2,)): np.array([0.0, 1.0, 0.0, 0.0]),
        (0, (3,)): np.array([0.0, 1.0, 0.0, 0.0]),
    }
    a = Sequence((2, 1), True)
    return TaskSpec(vocab, (a,), tables, ((a,),), 1, 3)


@pytest.fixture(scope="session")
def default_task():
    return gen_synthetic_task()


@pytest.fixture
def small_task():
    return gen_synthetic_task(vocab_size=4, order=1, max_len=5, noise=0.3, seed=3, n_sources=2)
