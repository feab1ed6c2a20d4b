import json

import numpy as np
import pandas as pd
import pytest

from app.bench import read_results, replication_seed, run_experiment, splitmix64, summarize, write_results
from app.bench.cli import EXIT_ALL_FAILED, EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from app.bench.results import manifest_path
from app.bench.runner import evaluation_points, parse_eval_on, score_method
from app.errors import ConfigError, StepError
from app.learners import METHOD_REGISTRY, EstimatorContext, h1sl
from app.learners.registry import MethodDefinition
from app.panel.io import write_csv
from app.schemas import RESULT_COLUMNS, RunResult
from app.simgen import PRESETS, ScenarioConfig, SimulatedPanel, save_scenario
from tests.conftest import exact_panel, linear_tau

QUICK = ["h1sl", "t", "did"]


def _row(mse, method="h1sl", status="ok", r=0):
    scored = status == "ok"
    return RunResult(
        scenario="paper-a",
        method=method,
        replication=r,
        seed=r,
        mse=mse if scored else None,
        sum_se=mse * 50 if scored else None,
        status=status,
    )


def _boom(dataset, context):
    raise StepError("did step 1", RuntimeError("solver diverged"))


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "settings.yaml"
    path.write_text("bench:\n  parallelism: 1\n")
    return str(path)


# ---------------------------------------------------------------------------
# Seeds and evaluation points
# ---------------------------------------------------------------------------


def test_splitmix64_reference_values():
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(1) == 0x910A2DEC89025CC1


def test_replication_seeds_are_distinct_and_stable():
    seeds = [replication_seed(42, r) for r in range(1000)]
    assert len(set(seeds)) == 1000
    assert replication_seed(42, 7) == 42 ^ splitmix64(7)
    assert all(0 <= s < 2**64 for s in seeds)


@pytest.mark.parametrize(
    "text, expected", [("all", ("all", 0)), ("treated", ("treated", 0)), ("fresh:500", ("fresh", 500))]
)
def test_parse_eval_on(text, expected):
    assert parse_eval_on(text) == expected


@pytest.mark.parametrize("text", ["fresh", "fresh:0", "fresh:-3", "control", ""])
def test_parse_eval_on_rejects(text):
    with pytest.raises(ConfigError):
        parse_eval_on(text)


def test_fresh_points_follow_the_true_effect():
    from app.simgen import generate

    panel = generate(PRESETS["paper-b"].with_seed(5))
    X, tau = evaluation_points(panel, "fresh:64", seed=5)
    assert X.shape == (64, 2)
    np.testing.assert_allclose(tau, 0.6 * np.cos(X[:, 0]) + 0.4 * np.cos(X[:, 1]))
    X_again, _ = evaluation_points(panel, "fresh:64", seed=5)
    np.testing.assert_array_equal(X, X_again)

    treated_X, treated_tau = evaluation_points(panel, "treated", seed=5)
    assert treated_X.shape[0] == panel.dataset.m
    np.testing.assert_array_equal(treated_tau, panel.true_tau_at[panel.dataset.treated_idx])


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


def _noiseless_null_panel(rng) -> SimulatedPanel:
    ds = exact_panel(rng)
    zeros = np.zeros(ds.n_units)
    return SimulatedPanel(
        dataset=ds,
        config=ScenarioConfig(name="exact-null", tau_kind="null"),
        true_tau_at=zeros,
        y0=ds.outcomes,
        y1=ds.outcomes,
    )


def test_noiseless_null_scores_near_zero(rng):
    panel = _noiseless_null_panel(rng)
    row = score_method("h1sl", panel, panel.dataset.features, panel.true_tau_at, EstimatorContext(), 0)
    assert row.ok
    assert row.mse <= 1e-12
    assert row.wall_time_ms == 0


def test_mse_is_sum_over_points(rng):
    panel = _noiseless_null_panel(rng)
    X = rng.normal(size=(40, 2))
    tau = linear_tau(X)
    row = score_method("h1sl", panel, X, tau, EstimatorContext(), 3)
    assert row.mse * 40 == pytest.approx(row.sum_se, rel=1e-12)
    assert row.sum_se == pytest.approx(np.sum(tau**2), rel=1e-6)


def test_failure_is_contained(monkeypatch, rng):
    monkeypatch.setitem(METHOD_REGISTRY, "did", MethodDefinition("did", "", "baseline", _boom))
    panel = _noiseless_null_panel(rng)
    row = score_method("did", panel, panel.dataset.features, panel.true_tau_at, EstimatorContext(), 2)
    assert not row.ok
    assert row.status.startswith("failed: StepError")
    assert row.mse is None and row.sum_se is None


def test_failed_method_does_not_stop_the_others(monkeypatch):
    monkeypatch.setitem(METHOD_REGISTRY, "did", MethodDefinition("did", "", "baseline", _boom))
    results = run_experiment(PRESETS["paper-a"], QUICK, reps=2, base_seed=1)
    assert [r.method for r in results] == QUICK * 2
    assert [r.ok for r in results] == [True, True, False] * 2


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def test_results_do_not_depend_on_parallelism():
    serial = run_experiment(PRESETS["paper-a"], QUICK, reps=4, parallelism=1, base_seed=42)
    parallel = run_experiment(PRESETS["paper-a"], QUICK, reps=4, parallelism=3, base_seed=42)
    assert [r.model_dump() for r in serial] == [r.model_dump() for r in parallel]


def test_rows_carry_replication_seeds():
    results = run_experiment(PRESETS["paper-c"], ["did"], reps=3, base_seed=9)
    assert [r.replication for r in results] == [0, 1, 2]
    assert [r.seed for r in results] == [replication_seed(9, r) for r in range(3)]
    assert all(r.scenario == "paper-c" for r in results)


def test_invalid_arguments_fail_before_any_run():
    with pytest.raises(ConfigError, match="Unknown method 'bogus'"):
        run_experiment(PRESETS["paper-a"], ["h1sl", "bogus"], reps=1)
    with pytest.raises(ConfigError):
        run_experiment(PRESETS["paper-a"], ["h1sl"], reps=0)
    with pytest.raises(ConfigError):
        run_experiment(PRESETS["paper-a"], ["h1sl"], reps=1, eval_on="fresh:x")
    with pytest.raises(ConfigError, match="at least one method"):
        run_experiment(PRESETS["paper-a"], [], reps=1)


# ---------------------------------------------------------------------------
# Summaries and result files
# ---------------------------------------------------------------------------


def test_summary_of_nothing_is_empty():
    assert summarize([]) == []


def test_summary_statistics():
    (row,) = summarize([_row(1.0), _row(3.0, r=1)])
    assert (row.n_reps, row.failure_count) == (2, 0)
    assert row.mean_mse == 2.0
    assert row.median_mse == 2.0
    assert (row.q25, row.q75) == (1.5, 2.5)


def test_summary_skips_failed_runs():
    rows = summarize([_row(1.0), _row(0.0, status="failed: boom", r=1), _row(0.5, method="x")])
    assert [(r.method, r.n_reps, r.failure_count) for r in rows] == [("h1sl", 2, 1), ("x", 1, 0)]
    assert rows[0].mean_mse == 1.0


def test_all_failed_group_has_no_statistics():
    (row,) = summarize([_row(0.0, status="failed: boom")])
    assert row.failure_count == 1
    assert row.median_mse is None


def test_results_file_round_trip(tmp_path):
    rows = [_row(0.1 + 1e-17), _row(2.0 / 3.0, r=1), _row(0.0, status="failed: x, y", r=2)]
    path = write_results(rows, tmp_path / "out" / "results.csv", manifest={"reps": 3})
    assert path.read_text().splitlines()[0] == ",".join(RESULT_COLUMNS)
    assert read_results(path) == rows

    manifest = json.loads(manifest_path(path).read_text())
    assert manifest["rows"] == 3
    assert manifest["reps"] == 3
    assert "created_at" in manifest


def test_read_results_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_results(tmp_path / "missing.csv")
    partial = tmp_path / "partial.csv"
    partial.write_text("scenario,method\npaper-a,h1sl\n")
    with pytest.raises(Exception, match="missing result column"):
        read_results(partial)


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------


def test_cli_run_and_summarize(tmp_path, config_file):
    out = tmp_path / "results.csv"
    args = ["--config", config_file, "run", "--scenario", "paper-a", "--methods", "h1sl,did"]
    args += ["--reps", "3", "--seed", "42", "--out", str(out)]
    assert main(args) == EXIT_OK
    first = out.read_bytes()
    assert main(args) == EXIT_OK
    assert out.read_bytes() == first

    frame = pd.read_csv(out)
    assert list(frame.columns) == RESULT_COLUMNS
    assert len(frame) == 6
    assert (frame["wall_time_ms"] == 0).all()
    manifest = json.loads(manifest_path(out).read_text())
    assert manifest["methods"] == ["h1sl", "did"]
    assert manifest["seed"] == 42
    assert "api_key" not in manifest["settings"]

    summary = tmp_path / "summary.csv"
    assert main(["--config", config_file, "summarize", "--in", str(out), "--out", str(summary)]) == EXIT_OK
    table = pd.read_csv(summary)
    assert table["method"].tolist() == ["h1sl", "did"]
    assert table["n_reps"].tolist() == [3, 3]


def test_cli_run_from_scenario_file(tmp_path, config_file):
    scenario = save_scenario(ScenarioConfig(name="tiny", n_units=30, t0=6, t1=3, treated_fraction=0.5), tmp_path / "tiny.json")
    out = tmp_path / "tiny.csv"
    code = main(
        ["--config", config_file, "run", "--scenario", str(scenario), "--methods", "did",
         "--reps", "2", "--out", str(out)]
    )
    assert code == EXIT_OK
    assert set(pd.read_csv(out)["scenario"]) == {"tiny"}


def test_cli_all_failed(monkeypatch, tmp_path, config_file):
    monkeypatch.setitem(METHOD_REGISTRY, "did", MethodDefinition("did", "", "baseline", _boom))
    out = tmp_path / "results.csv"
    code = main(
        ["--config", config_file, "run", "--scenario", "paper-c", "--methods", "did",
         "--reps", "2", "--parallelism", "1", "--out", str(out)]
    )
    assert code == EXIT_ALL_FAILED
    assert out.exists()


def test_cli_config_errors(tmp_path, config_file):
    out = str(tmp_path / "r.csv")
    assert main(["--config", config_file, "run", "--scenario", "paper-a", "--methods", "bogus",
                 "--out", out]) == EXIT_CONFIG
    assert main(["--config", config_file, "run", "--scenario", "paper-q", "--out", out]) == EXIT_CONFIG
    assert main(["--config", str(tmp_path / "absent.yaml"), "presets"]) == EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text("bench:\n  methods: [h1sl, nope]\n")
    assert main(["--config", str(bad), "presets"]) == EXIT_CONFIG


def test_cli_io_errors(tmp_path, config_file):
    missing = str(tmp_path / "missing.csv")
    out = str(tmp_path / "out.csv")
    assert main(["--config", config_file, "summarize", "--in", missing, "--out", out]) == EXIT_IO
    assert main(["--config", config_file, "estimate", "--data", missing, "--method", "h1sl",
                 "--out", out]) == EXIT_IO


def test_cli_unreadable_csv_is_an_io_error(tmp_path, config_file):
    out = str(tmp_path / "out.csv")
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    latin = tmp_path / "latin.csv"
    latin.write_bytes(b"unit_id,period,outcome,treated,x1\n\xe9t\xe9,1,0.5,0,1.0\n")
    for path in (str(empty), str(latin)):
        assert main(["--config", config_file, "summarize", "--in", path, "--out", out]) == EXIT_IO
        assert main(["--config", config_file, "estimate", "--data", path, "--method", "h1sl",
                     "--out", out]) == EXIT_IO


def test_cli_estimate(tmp_path, config_file, rng):
    ds = exact_panel(rng, tau=linear_tau)
    data = write_csv(ds, tmp_path / "panel.csv")
    out = tmp_path / "tau.csv"
    code = main(["--config", config_file, "estimate", "--data", str(data), "--method", "h1sl",
                 "--out", str(out)])
    assert code == EXIT_OK
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["unit_id", "x1", "x2", "tau_hat"]
    assert len(frame) == ds.n_units
    expected = h1sl(ds).evaluate(frame[["x1", "x2"]].to_numpy())
    np.testing.assert_allclose(frame["tau_hat"], expected, atol=1e-6)


def test_cli_presets(capsys):
    assert main(["presets"]) == EXIT_OK
    printed = capsys.readouterr().out
    assert "paper-a:" in printed and "h1sl (synthetic)" in printed
