import numpy as np
import pytest

from dcmbr.errors import ConfigError, DomainError
from dcmbr.harness.config import ExperimentConfig, load_config
from dcmbr.harness.experiments import chain_task, pmap, run_experiment
from dcmbr.harness.report import SCHEMAS, render_csv, validate_rows, write_jsonl
from dcmbr.harness.stats import collapse_table, kendall_tau, paired_bootstrap
from dcmbr.harness.synthetic import gen_synthetic_task, perturb_task
from dcmbr.model import build_from_spec, gold_rank
from dcmbr.utility import exact_match, sentence_bleu
from dcmbr.decoding import beam_search
import oracles

TINY = dict(n_sources=3, n_seeds=2, n=5, lambdas=(0.0, 0.2), temperatures=(0.5, 1.0),
            n_values=(3, 6), lengths=(4, 8), topn=4)


class TestSynthetic:
    def test_seeded(self):
        a, b = gen_synthetic_task(seed=5), gen_synthetic_task(seed=5)
        assert a.references == b.references and a.vocab == b.vocab
        assert gen_synthetic_task(seed=6).references != a.references

    def test_gold_is_greedy_path(self, default_task):
        lm = build_from_spec(default_task, 0.1)
        for s, gold in default_task.eval_set():
            assert beam_search(lm, s, 1) == gold

    def test_gold_tokens_distinct_and_length(self, default_task):
        for _, gold in default_task.eval_set():
            content = gold.content
            assert len(set(content)) == len(content) >= 4
            assert 0 not in content

    def test_rows_never_emit_bos(self, default_task):
        assert all(row[0] == 0.0 for row in default_task.tables.values())

    def test_bad_args(self):
        with pytest.raises(DomainError):
            gen_synthetic_task(vocab_size=2)
        with pytest.raises(DomainError):
            gen_synthetic_task(noise=1.5)

    def test_perturb_moves_ranks(self, default_task):
        task = perturb_task(default_task, 0.9, seed=1)
        ranks = [gold_rank(task.conditional(s, g.token_ids[:i]), tok)
                 for s, g in task.eval_set() for i, tok in enumerate(g.token_ids)]
        assert max(ranks) > 0
        for row in task.tables.values():
            assert abs(row.sum() - 1) < 1e-12


class TestStats:
    def test_kendall_matches_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x, y = rng.integers(0, 4, 15), rng.integers(0, 4, 15)
            assert kendall_tau(x, y) == pytest.approx(oracles.kendall_tau_b(x, y), abs=1e-12)

    def test_kendall_extremes(self):
        assert kendall_tau([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
        with pytest.raises(DomainError):
            kendall_tau([1], [1])

    def test_bootstrap_identical_systems(self):
        hyps = [["a", "b"], ["c"], ["a"]]
        res = paired_bootstrap(hyps, hyps, hyps, exact_match, resamples=200)
        assert res.p_b_better == 0.5 and res.p_a_better == 0.5

    def test_bootstrap_clear_winner(self):
        golds = [["a", "b", "c", "d"]] * 30
        good = golds
        bad = [["x"]] * 30
        res = paired_bootstrap(bad, good, golds, sentence_bleu, resamples=300, seed=3)
        assert res.p_b_better == 1.0 and res.mean_b > res.mean_a

    def test_bootstrap_deterministic(self):
        rng = np.random.default_rng(1)
        golds = [list(rng.choice(list("abc"), 3)) for _ in range(20)]
        a = [list(rng.choice(list("abc"), 3)) for _ in range(20)]
        b = [list(rng.choice(list("abc"), 3)) for _ in range(20)]
        r1 = paired_bootstrap(a, b, golds, sentence_bleu, seed=2)
        r2 = paired_bootstrap(a, b, golds, sentence_bleu, seed=2)
        assert r1 == r2
        assert r1.p_a_better + r1.p_b_better == pytest.approx(1.0)

    def test_bootstrap_minimum_resamples(self):
        with pytest.raises(DomainError):
            paired_bootstrap([["a"]], [["a"]], [["a"]], exact_match, resamples=10)

    def test_collapse_table(self):
        rows = collapse_table([0.1, 0.2], [30])
        assert rows[0]["gold_seq_prob"] == pytest.approx(0.0423912, abs=1e-7)
        assert rows[1]["gold_seq_prob"] == pytest.approx(0.0012379, abs=1e-7)


class TestConfig:
    def test_defaults_per_experiment(self):
        assert ExperimentConfig.for_experiment("temp-grid").lambdas == (0.1,)
        assert ExperimentConfig.for_experiment("quality-vs-lambda").lambdas == (0.0, 0.1, 0.2, 0.3)

    def test_unknown(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.for_experiment("fig9")
        with pytest.raises(ConfigError):
            ExperimentConfig.for_experiment("collapse", bogus=1)

    def test_invalid_values(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.for_experiment("n-sweep", temperatures=(0.0,))
        with pytest.raises(ConfigError):
            ExperimentConfig.for_experiment("n-sweep", lambdas=())

    def test_toml(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text('experiment = "n-sweep"\nlambdas = [0.2]\nn_seeds = 2\n')
        cfg = load_config(path, seed=9)
        assert cfg.experiment == "n-sweep" and cfg.lambdas == (0.2,) and cfg.seed == 9

    def test_bad_toml(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text("lambdas = [\n")
        with pytest.raises(ConfigError):
            load_config(path, "collapse")


class TestReport:
    def test_schema_enforced(self):
        with pytest.raises(ConfigError):
            validate_rows("collapse", [{"experiment": "collapse"}])

    def test_csv_format(self):
        rows = [{"experiment": "collapse", "lambda": 0.1, "length": 3, "gold_seq_prob": 0.729,
                 "model_seq_prob": None}]
        text = render_csv("collapse", rows)
        assert text == "experiment,lambda,length,gold_seq_prob,model_seq_prob\ncollapse,0.1,3,0.729,\n"

    def test_jsonl(self, tmp_path):
        write_jsonl([{"a": 1}, {"b": 2}], tmp_path / "x.jsonl")
        assert (tmp_path / "x.jsonl").read_text() == '{"a": 1}\n{"b": 2}\n'


def test_pmap_ordered():
    assert pmap(abs, [-3, 1, -2, 5], workers=2) == [3, 1, 2, 5]


def test_chain_task():
    task = chain_task(5)
    assert len(task.references[0][0]) == 5 and task.max_len == 5


@pytest.mark.parametrize("exp", list(SCHEMAS))
def test_every_experiment_runs(exp):
    res = run_experiment(ExperimentConfig.for_experiment(exp, **TINY))
    assert res.rows
    assert tuple(res.rows[0]) == SCHEMAS[exp]
    assert render_csv(exp, res.rows).count("\n") == len(res.rows) + 1


def test_collapse_model_matches_closed_form():
    res = run_experiment(ExperimentConfig.for_experiment("collapse"))
    for r in res.rows:
        assert r["model_seq_prob"] == pytest.approx(r["gold_seq_prob"], abs=1e-12)


def test_rank_histogram_shifts_with_smoothing():
    res = run_experiment(ExperimentConfig.for_experiment("rank-histogram", lambdas=(0.0, 0.3)))
    for lam in (0.0, 0.3):
        assert sum(r["count"] for r in res.rows if r["lambda"] == lam) > 0
    # smoothing is argmax preserving, so every bucket count is unchanged
    by_lam = {lam: [r["count"] for r in res.rows if r["lambda"] == lam] for lam in (0.0, 0.3)}
    assert by_lam[0.0] == by_lam[0.3]


def test_utility_grid_marks_best():
    res = run_experiment(ExperimentConfig.for_experiment("utility-grid", **{**TINY, "lambdas": (0.1,)}))
    for m in ("chrf", "sentence_bleu", "exact_match"):
        for dec in ("dc_mbr", "mbr"):
            col = [r for r in res.rows if r["metric"] == m and r["decoder"] == dec]
            assert any(r["best_for_metric"] for r in col)
    assert any(k.startswith("diagonal_dominance") for k in res.summary)
