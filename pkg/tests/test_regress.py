import numpy as np
import pytest
from pydantic import ValidationError
from scipy.special import expit

from app.errors import ConfigError, RegressionError
from app.regress import RegressorSpec, fit, list_regressors, resolve_regressor
from app.regress.propensity import ConstantPropensity, fit_propensity

ALL_SPECS = [
    RegressorSpec(kind="ols"),
    RegressorSpec(kind="ridge", alpha=2.0),
    RegressorSpec(kind="kernel"),
    RegressorSpec(kind="knn", k=3),
]


def test_registry_lists_every_backend():
    assert set(list_regressors()) == {"ols", "ridge", "kernel", "knn"}


def test_unknown_backend():
    with pytest.raises(ConfigError, match="Unknown regressor kind 'forest'"):
        resolve_regressor("forest")


def test_spec_ranges_are_checked():
    with pytest.raises(ValidationError):
        RegressorSpec(kind="knn", k=0)
    with pytest.raises(ValidationError):
        RegressorSpec(kind="kernel", bandwidth=-1.0)
    with pytest.raises(ValidationError):
        RegressorSpec(kind="ridge", alpha=-0.5)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.kind)
def test_constant_response_is_reproduced(rng, spec):
    X = rng.normal(size=(20, 2))
    model = fit(spec, X, np.full(20, 3.0))
    np.testing.assert_allclose(model.predict(X), 3.0, atol=1e-9)


def test_ols_recovers_linear_effect(rng):
    X = rng.normal(size=(30, 2))
    model = fit(RegressorSpec(), X, 0.6 * X[:, 0] + 0.4 * X[:, 1])
    np.testing.assert_allclose(model.state["coef"], [0.6, 0.4], atol=1e-9)
    assert model.state["intercept"] == pytest.approx(0.0, abs=1e-9)


def test_ols_translation_changes_intercept_only(rng):
    X = rng.normal(size=(25, 3))
    y = rng.normal(size=25)
    shift = np.array([5.0, -2.0, 0.5])
    base = fit(RegressorSpec(), X, y)
    moved = fit(RegressorSpec(), X + shift, y)
    np.testing.assert_allclose(moved.state["coef"], base.state["coef"], atol=1e-9)
    np.testing.assert_allclose(moved.predict(X + shift), base.predict(X), atol=1e-9)


def test_rank_deficient_ols_points_to_ridge():
    X = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(RegressionError, match="ridge"):
        fit(RegressorSpec(), X, np.array([1.0, 2.0, 3.0]))
    model = fit(RegressorSpec(kind="ridge", alpha=1.0), X, np.array([1.0, 2.0, 3.0]))
    assert np.all(np.isfinite(model.predict(X)))


def test_ridge_without_penalty_is_ols(rng):
    X = rng.normal(size=(15, 2))
    y = rng.normal(size=15)
    ols = fit(RegressorSpec(), X, y).predict(X)
    ridge = fit(RegressorSpec(kind="ridge", alpha=0.0), X, y).predict(X)
    np.testing.assert_allclose(ridge, ols, atol=1e-12)


def test_ridge_matches_the_centered_normal_equations(rng):
    X = rng.normal(size=(20, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + rng.normal(size=20)
    model = fit(RegressorSpec(kind="ridge", alpha=2.0), X, y)
    xc, yc = X - X.mean(axis=0), y - y.mean()
    coef = np.linalg.solve(xc.T @ xc + 2.0 * np.eye(3), xc.T @ yc)
    np.testing.assert_allclose(model.state["coef"], coef, atol=1e-10)
    assert model.state["intercept"] == pytest.approx(y.mean() - X.mean(axis=0) @ coef, abs=1e-10)


def test_knn_single_neighbour_interpolates(rng):
    X = rng.normal(size=(12, 2))
    y = rng.normal(size=12)
    np.testing.assert_allclose(fit(RegressorSpec(kind="knn", k=1), X, y).predict(X), y)


def test_knn_with_all_neighbours_is_the_mean(rng):
    X = rng.normal(size=(9, 2))
    y = rng.normal(size=9)
    model = fit(RegressorSpec(kind="knn", k=9), X, y)
    np.testing.assert_allclose(model.predict(rng.normal(size=(4, 2))), y.mean(), atol=1e-12)


def test_knn_k_is_clamped_to_sample_size(rng):
    X = rng.normal(size=(4, 1))
    y = rng.normal(size=4)
    model = fit(RegressorSpec(kind="knn", k=50), X, y)
    np.testing.assert_allclose(model.predict(X), y.mean(), atol=1e-12)


def test_kernel_with_huge_bandwidth_is_the_mean(rng):
    X = rng.normal(size=(40, 2))
    y = rng.normal(size=40)
    model = fit(RegressorSpec(kind="kernel", bandwidth=1e6), X, y)
    np.testing.assert_allclose(model.predict(X[:5]), y.mean(), atol=1e-6)


def test_kernel_bandwidth_is_chosen_from_the_grid(rng):
    X = np.repeat(rng.normal(size=(15, 2)), 4, axis=0)
    y = np.cos(X[:, 0]) + rng.normal(scale=0.05, size=60)
    spec = RegressorSpec(kind="kernel", bandwidth_grid=(0.1, 0.5, 2.0))
    model = fit(spec, X, y)
    assert model.state["bandwidth"] in (0.1, 0.5, 2.0)


def test_fit_is_deterministic(rng):
    X = rng.normal(size=(30, 2))
    y = rng.normal(size=30)
    for spec in ALL_SPECS:
        np.testing.assert_array_equal(fit(spec, X, y).predict(X), fit(spec, X, y).predict(X))


def test_model_evaluates_single_point(rng):
    X = rng.normal(size=(10, 2))
    model = fit(RegressorSpec(), X, X[:, 0])
    assert model(np.array([1.5, -3.0])).shape == (1,)
    assert model.predict(np.array([1.5, -3.0]))[0] == pytest.approx(1.5, abs=1e-9)


def test_model_rejects_bad_inputs(rng):
    X = rng.normal(size=(10, 2))
    model = fit(RegressorSpec(), X, X[:, 0])
    with pytest.raises(RegressionError):
        model.predict(np.array([[np.nan, 1.0]]))
    with pytest.raises(RegressionError):
        model.predict(np.ones((2, 3)))
    with pytest.raises(RegressionError):
        fit(RegressorSpec(), X, np.ones(9))


# ---------------------------------------------------------------------------
# Propensity
# ---------------------------------------------------------------------------


def test_symmetric_data_gives_one_half():
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    D = np.array([False, True, False, True])
    model = fit_propensity(X, D)
    assert model.predict(np.array([[0.0]]))[0] == pytest.approx(0.5, abs=1e-9)
    assert not model.separated


def test_logistic_recovers_generating_coefficients():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(100_000, 2))
    D = rng.random(100_000) < expit(X @ np.array([1.0, 1.0]))
    model = fit_propensity(X, D)
    assert model.converged
    np.testing.assert_allclose(model.coefficients, [1.0, 1.0], atol=0.05)
    assert model.intercept == pytest.approx(0.0, abs=0.05)


def test_single_class_is_an_error(rng):
    with pytest.raises(RegressionError, match="single-class"):
        fit_propensity(rng.normal(size=(5, 2)), np.ones(5, bool))


def test_separation_is_flagged_and_clipped(caplog):
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    with caplog.at_level("WARNING"):
        model = fit_propensity(X, np.array([False, False, True, True]))
    assert model.separated
    assert "separated" in caplog.text
    p = model.predict(np.array([[-10.0], [0.5], [10.0]]))
    assert np.all((p >= 0.01) & (p <= 0.99))
    assert p[0] == pytest.approx(0.01)
    assert p[2] == pytest.approx(0.99)


def test_predictions_always_within_clip(rng):
    X = rng.normal(size=(200, 2))
    D = rng.random(200) < expit(4 * X[:, 0])
    p = fit_propensity(X, D).predict(rng.normal(scale=10, size=(500, 2)))
    assert p.min() >= 0.01 and p.max() <= 0.99


def test_constant_propensity():
    e = ConstantPropensity(0.3)
    np.testing.assert_array_equal(e.predict(np.zeros((4, 2))), 0.3)
