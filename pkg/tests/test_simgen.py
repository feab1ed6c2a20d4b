import numpy as np
import pytest
from pydantic import ValidationError

from app.errors import ConfigError
from app.regress import RegressorSpec
from app.simgen import PRESETS, ScenarioConfig, generate, load_scenario, save_scenario, true_tau


def test_noiseless_factor_path():
    panel = generate(ScenarioConfig(factor_noise_sd=0.0, outcome_noise_sd=0.0, seed=4))
    factor = panel.generator_state["factor"]
    np.testing.assert_allclose(factor, 0.95 ** np.arange(20), rtol=1e-13)
    expected = panel.generator_state["loadings"][:, None] * factor[None, :]
    np.testing.assert_array_equal(panel.y0, expected)


def test_defaults_shape_and_no_anticipation():
    panel = generate(ScenarioConfig(seed=1))
    ds = panel.dataset
    assert (ds.n_units, ds.n_periods, ds.n_features, ds.t0) == (50, 20, 2, 10)
    np.testing.assert_array_equal(panel.y1[:, :10], panel.y0[:, :10])
    np.testing.assert_array_equal(ds.pre_outcomes, panel.y0[:, :10])
    np.testing.assert_array_equal(ds.post_outcomes[ds.treated_idx], panel.y1[ds.treated_idx, 10:])
    np.testing.assert_array_equal(ds.post_outcomes[ds.control_idx], panel.y0[ds.control_idx, 10:])


def test_true_tau_attached_per_row():
    panel = generate(ScenarioConfig(tau_kind="cosine", seed=2))
    X = panel.dataset.features
    np.testing.assert_allclose(panel.true_tau_at, 0.6 * np.cos(X[:, 0]) + 0.4 * np.cos(X[:, 1]))
    treated = panel.dataset.treated_idx
    np.testing.assert_allclose(
        panel.y1[treated, 10:] - panel.y0[treated, 10:], np.repeat(panel.true_tau_at[treated, None], 10, 1)
    )


def test_null_scenario_has_identical_arms():
    panel = generate(ScenarioConfig(tau_kind="null", seed=8))
    np.testing.assert_array_equal(panel.y1, panel.y0)


@pytest.mark.parametrize(
    "kind, x, expected",
    [
        ("linear", (1.0, 1.0), 1.0),
        ("linear", (0.0, 0.0), 0.0),
        ("linear", (2.0, -1.0), 0.8),
        ("cosine", (0.0, 0.0), 1.0),
        ("null", (3.0, -7.0), 0.0),
    ],
)
def test_true_tau_values(kind, x, expected):
    assert true_tau(ScenarioConfig(tau_kind=kind), np.array(x)) == pytest.approx(expected, abs=1e-15)


def test_true_tau_dimension_mismatch():
    with pytest.raises(ValueError, match="length 2"):
        true_tau(ScenarioConfig(), np.array([1.0, 2.0, 3.0]))


def test_same_seed_same_panel():
    config = PRESETS["paper-a"].with_seed(123)
    a, b = generate(config), generate(config)
    np.testing.assert_array_equal(a.dataset.outcomes, b.dataset.outcomes)
    np.testing.assert_array_equal(a.dataset.features, b.dataset.features)
    np.testing.assert_array_equal(a.dataset.treated_mask, b.dataset.treated_mask)


def test_adjacent_seeds_share_no_draws():
    a = generate(PRESETS["paper-a"].with_seed(500))
    b = generate(PRESETS["paper-a"].with_seed(501))
    assert np.intersect1d(a.dataset.outcomes, b.dataset.outcomes).size == 0
    assert np.intersect1d(a.dataset.features, b.dataset.features).size == 0


def test_loading_moments():
    panel = generate(ScenarioConfig(n_units=10_000, seed=9))
    loadings = panel.generator_state["loadings"]
    assert abs(loadings.mean() - 1.0) <= 0.05
    assert abs(loadings.var() - 1.0) <= 0.1


def test_ar1_noise_recursion():
    config = ScenarioConfig(
        n_units=10_000,
        error_kind="ar1",
        loading_mean=0.0,
        loading_sd=0.0,
        tau_kind="null",
        seed=6,
    )
    noise = generate(config).y0
    lagged, current = noise[:, :-1].reshape(-1), noise[:, 1:].reshape(-1)
    phi = (lagged @ current) / (lagged @ lagged)
    assert phi == pytest.approx(0.2, abs=0.02)


def test_treated_fraction_fixes_the_count():
    panel = generate(ScenarioConfig(n_units=40, treated_fraction=0.25, seed=3))
    assert panel.dataset.m == 10


def test_per_unit_beta_mode():
    panel = generate(ScenarioConfig(propensity_beta_mode="per_unit", seed=3))
    assert panel.generator_state["beta"].shape == (50, 2)
    assert 0 < panel.dataset.m < 50


# ---------------------------------------------------------------------------
# Scenario configs
# ---------------------------------------------------------------------------


def test_presets():
    assert set(PRESETS) == {
        "paper-a", "paper-b", "paper-c", "paper-a-ar1", "paper-b-ar1", "paper-c-ar1",
    }
    assert PRESETS["paper-b"].regressor == RegressorSpec(kind="kernel")
    assert PRESETS["paper-c-ar1"].error_kind == "ar1"
    assert PRESETS["paper-c"].tau_kind == "null"


def test_scenario_validation():
    with pytest.raises(ValidationError):
        ScenarioConfig(factor_rho=1.5)
    with pytest.raises(ValidationError):
        ScenarioConfig(outcome_noise_sd=-0.1)
    with pytest.raises(ValidationError):
        ScenarioConfig(d=1, tau_kind="linear")
    assert ScenarioConfig(d=1, tau_kind="null").d == 1


def test_scenario_json_round_trip(tmp_path):
    config = PRESETS["paper-b-ar1"].with_seed(77)
    path = save_scenario(config, tmp_path / "scenario.json")
    assert load_scenario(path) == config
    assert load_scenario("paper-a") is PRESETS["paper-a"]


def test_unknown_scenario(tmp_path):
    with pytest.raises(ConfigError, match="neither a preset nor a file"):
        load_scenario("paper-z")
    bad = tmp_path / "bad.json"
    bad.write_text('{"t0": 0}')
    with pytest.raises(ConfigError, match="Invalid scenario"):
        load_scenario(bad)
