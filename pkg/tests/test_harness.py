import numpy as np
import pytest

from lrkf.cli import main
from lrkf.exceptions import ConfigError
from lrkf.harness import (
    ExperimentConfig,
    parse_config,
    run_experiment,
    tune_experiment,
    validate_config,
)


def write_config(path, text):
    path.write_text(text)
    return str(path)


BASIC = """
[experiment]
seeds = 0 1
metrics = rmse nll
output = {out}

[model]
hidden = 8
activation = tanh
family = gaussian
obs_variance = 0.04

[method]
name = lrekf
rank = 3
gamma = 1.0
process_noise = 1e-4
initial_precision = 1.0

[stream]
kind = piecewise_sine
num_tasks = 2
steps_per_task = 30
noise_sd = 0.2
"""


class TestParsingAndValidation:
    def test_round_trip_basic_config(self, tmp_path):
        cfg = parse_config(write_config(tmp_path / "c.ini", BASIC.format(out=tmp_path / "o")))
        assert cfg.method == "lrekf"
        assert cfg.method_params["rank"] == 3
        assert cfg.seeds == [0, 1]
        assert validate_config(cfg) == []

    def test_empty_config_names_required_fields(self, tmp_path):
        cfg = parse_config(write_config(tmp_path / "c.ini", "[experiment]\n"))
        problems = validate_config(cfg)
        joined = "\n".join(problems)
        assert "method.name" in joined
        assert "stream.kind" in joined

    def test_unknown_method_lists_valid_tags(self, tmp_path):
        text = BASIC.format(out=tmp_path) .replace("name = lrekf", "name = mystery")
        cfg = parse_config(write_config(tmp_path / "c.ini", text))
        problems = validate_config(cfg)
        assert any("mystery" in p and "lrekf" in p for p in problems)

    def test_all_violations_reported_not_just_first(self, tmp_path):
        cfg = ExperimentConfig(
            method="mystery",
            method_params={"rank": -1},
            stream={"kind": "nope"},
            model={"family": "gaussian"},
            seeds=[],
            passes=0,
            metrics=("rmse", "bogus"),
        )
        problems = validate_config(cfg)
        assert len(problems) >= 5

    def test_multipass_requires_static_stream(self, tmp_path):
        text = BASIC.format(out=tmp_path).replace("seeds = 0 1", "seeds = 0\npasses = 2")
        cfg = parse_config(write_config(tmp_path / "c.ini", text))
        assert any("passes" in p for p in validate_config(cfg))

    def test_missing_file_is_config_error(self):
        with pytest.raises(ConfigError):
            parse_config("/nonexistent/config.ini")

    def test_malformed_file_is_config_error(self, tmp_path):
        path = tmp_path / "broken.ini"
        path.write_text("key_without_section = 1\n")
        with pytest.raises(ConfigError, match="malformed"):
            parse_config(str(path))


class TestRunExperiment:
    def test_byte_identical_reruns(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        text = BASIC.format(out="{out}")
        cfg1 = parse_config(write_config(tmp_path / "c1.ini", text.format(out=out1)))
        cfg2 = parse_config(write_config(tmp_path / "c2.ini", text.format(out=out2)))
        run_experiment(cfg1)
        run_experiment(cfg2)
        b1 = (out1 / "metrics.csv").read_bytes()
        b2 = (out2 / "metrics.csv").read_bytes()
        assert b1 == b2
        assert (out1 / "metrics_seed0.csv").exists()
        assert (out1 / "summary.csv").exists()

    def test_rank0_matches_vdekf_per_step_nll(self, tmp_path):
        base = BASIC.format(out="{out}").replace("seeds = 0 1", "seeds = 0")
        t_lr = base.replace("rank = 3", "rank = 0").format(out=tmp_path / "lr")
        t_vd = base.replace("name = lrekf", "name = vdekf").format(out=tmp_path / "vd")
        run_experiment(parse_config(write_config(tmp_path / "lr.ini", t_lr)))
        run_experiment(parse_config(write_config(tmp_path / "vd.ini", t_vd)))

        def nll_column(out):
            rows = (out / "metrics.csv").read_text().strip().splitlines()[1:]
            return np.array([float(r.split(",")[-1]) for r in rows if ",nll," in r])

        a, b = nll_column(tmp_path / "lr"), nll_column(tmp_path / "vd")
        assert a.shape == b.shape
        assert np.max(np.abs(a - b)) < 1e-10

    def test_seed_failure_does_not_kill_siblings(self, tmp_path, monkeypatch):
        from lrkf import harness
        from lrkf.exceptions import NumericalDegeneracyError

        real = harness.run_seed

        def flaky(cfg, seed):
            if seed == 1:
                return [], "NumericalDegeneracyError: injected"
            return real(cfg, seed)

        monkeypatch.setattr(harness, "run_seed", flaky)
        cfg = parse_config(
            write_config(tmp_path / "c.ini", BASIC.format(out=tmp_path / "o"))
        )
        status = harness.run_experiment(cfg)
        assert status["completed"] == [0]
        assert 1 in status["failed"]
        assert (tmp_path / "o" / "failures.txt").exists()

    def test_invalid_config_raises_config_error(self, tmp_path):
        text = BASIC.format(out=tmp_path / "o").replace("name = lrekf", "name = zzz")
        cfg = parse_config(write_config(tmp_path / "c.ini", text))
        with pytest.raises(ConfigError):
            run_experiment(cfg)

    def test_two_passes_double_the_logged_steps(self, tmp_path):
        rng = np.random.default_rng(0)
        csv_path = tmp_path / "data.csv"
        lines = ["a,b,y"] + [
            f"{rng.standard_normal()},{rng.standard_normal()},{rng.standard_normal()}"
            for _ in range(40)
        ]
        csv_path.write_text("\n".join(lines) + "\n")
        text = """
[experiment]
seeds = 0
passes = {passes}
metrics = rmse
output = {out}

[model]
hidden = 4
family = gaussian
obs_variance = 1.0

[method]
name = lrekf
rank = 2

[stream]
kind = csv
path = {csv}
target = y
"""

        def rows(passes, out):
            cfg = parse_config(write_config(
                tmp_path / f"c{passes}.ini",
                text.format(passes=passes, out=out, csv=csv_path),
            ))
            run_experiment(cfg)
            return len((out / "metrics.csv").read_text().strip().splitlines()) - 1

        one = rows(1, tmp_path / "p1")
        two = rows(2, tmp_path / "p2")
        assert two == 2 * one


class TestTune:
    def test_tune_returns_best_and_trials(self, tmp_path):
        text = BASIC.format(out=tmp_path / "o") + "\n[tune]\nbudget = 4\nsteps = 40\n"
        cfg = parse_config(write_config(tmp_path / "c.ini", text))
        best, trials = tune_experiment(cfg)
        assert len(trials) == 4
        assert set(best) >= {"process_noise", "initial_precision", "gamma"}
        finite = [t for t in trials if np.isfinite(t["objective"])]
        assert finite
        best_obj = min(t["objective"] for t in finite)
        assert any(t["objective"] == best_obj for t in finite)

    def test_tune_never_touches_events_beyond_prefix(self, tmp_path):
        # the tuning objective only consumes tune.steps events
        from lrkf import harness

        text = BASIC.format(out=tmp_path / "o") + "\n[tune]\nbudget = 2\nsteps = 10\n"
        cfg = parse_config(write_config(tmp_path / "c.ini", text))
        seen = []
        real_eval = harness.prequential_eval

        def spy(learner, events, *args, **kwargs):
            seen.append(len(list(events)))
            return real_eval(learner, events, *args, **kwargs)

        harness.prequential_eval, saved = spy, harness.prequential_eval
        try:
            tune_experiment(cfg)
        finally:
            harness.prequential_eval = saved
        assert all(n <= 10 for n in seen)


class TestCli:
    def test_list_methods(self, capsys):
        assert main(["list-methods"]) == 0
        out = capsys.readouterr().out
        for tag in ("lrekf", "fcekf", "vdekf", "sgd_rb", "ogd", "iekf"):
            assert tag in out

    def test_validate_ok_and_failing(self, tmp_path, capsys):
        good = write_config(tmp_path / "good.ini", BASIC.format(out=tmp_path / "o"))
        assert main(["validate", good]) == 0
        bad_text = BASIC.format(out=tmp_path / "o").replace("name = lrekf", "name = zzz")
        bad = write_config(tmp_path / "bad.ini", bad_text)
        assert main(["validate", bad]) == 1
        assert "zzz" in capsys.readouterr().out

    def test_run_exit_codes(self, tmp_path, capsys):
        good = write_config(tmp_path / "good.ini", BASIC.format(out=tmp_path / "o"))
        assert main(["run", good]) == 0
        assert (tmp_path / "o" / "metrics.csv").exists()

    def test_bandit_verb(self, tmp_path, capsys):
        text = """
[experiment]
seeds = 0
output = {out}

[model]
hidden = 8
activation = tanh
family = gaussian
obs_variance = 0.25

[method]
name = lrekf
rank = 3
process_noise = 1e-4

[stream]
kind = synthetic_classification
in_dim = 3

[bandit]
actions = 3
steps = 60
policy = thompson
""".format(out=tmp_path / "o")
        cfgfile = write_config(tmp_path / "b.ini", text)
        assert main(["bandit", cfgfile]) == 0
        assert (tmp_path / "o" / "bandit_metrics.csv").exists()

    def test_tune_verb(self, tmp_path):
        text = BASIC.format(out=tmp_path / "o") + "\n[tune]\nbudget = 2\nsteps = 20\n"
        cfgfile = write_config(tmp_path / "t.ini", text)
        assert main(["tune", cfgfile]) == 0
        assert (tmp_path / "o" / "trials.csv").exists()


@pytest.mark.parametrize("tag", sorted(__import__("lrkf.learners", fromlist=["REGISTRY"]).REGISTRY))
def test_every_registry_method_runs(tag, tmp_path):
    text = BASIC.format(out=tmp_path / "o").replace("name = lrekf", f"name = {tag}")
    text = text.replace("seeds = 0 1", "seeds = 0").replace("steps_per_task = 30", "steps_per_task = 12")
    if tag in ("sgd_rb", "ogd"):
        text += "lr = 1e-4\n"
    cfg = parse_config(write_config(tmp_path / "c.ini", text))
    status = run_experiment(cfg)
    assert status["completed"] == [0]
    assert not status["failed"]


def test_inflation_variants_run_in_learner(tmp_path):
    for variant in ("simple", "hybrid", "bayesian"):
        text = BASIC.format(out=tmp_path / variant).replace("seeds = 0 1", "seeds = 0")
        text = text.replace("rank = 3", f"rank = 3\ninflation = {variant}\ninflation_alpha = 0.05")
        cfg = parse_config(write_config(tmp_path / f"{variant}.ini", text))
        status = run_experiment(cfg)
        assert status["completed"] == [0], variant


def test_worker_fanout_matches_serial(tmp_path, monkeypatch):
    out1, out2 = tmp_path / "s", tmp_path / "p"
    text = BASIC.format(out="{out}")
    cfg1 = parse_config(write_config(tmp_path / "c1.ini", text.format(out=out1)))
    cfg2 = parse_config(write_config(tmp_path / "c2.ini", text.format(out=out2)))
    run_experiment(cfg1)
    monkeypatch.setenv("LRKF_WORKERS", "2")
    run_experiment(cfg2)
    assert (out1 / "metrics.csv").read_bytes() == (out2 / "metrics.csv").read_bytes()
