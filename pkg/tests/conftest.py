"""Shared fixtures: seeded generators and noiseless panels with exact synthetic controls."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
import pytest

from app.panel import PanelDataset


def exact_panel(
    rng: np.random.Generator,
    m: int = 5,
    n: int = 6,
    t0: int = 10,
    t1: int = 5,
    d: int = 2,
    tau: Callable[[np.ndarray], np.ndarray] | None = None,
) -> PanelDataset:
    """Treated units are convex combinations of the controls in every period.

    Controls are independent Gaussian draws; n < t0 - 1 keeps the centered
    donor matrix full column rank, so the zero-residual weights are unique.
    ``tau(X)`` is added to the treated units' post-period outcomes.
    """
    T = t0 + t1
    controls = 5.0 + rng.normal(size=(n, T))
    weights = rng.dirichlet(np.ones(n), size=m)
    treated = weights @ controls
    X = rng.normal(size=(m + n, d))
    if tau is not None:
        treated[:, t0:] += tau(X[:m])[:, None]
    return PanelDataset.from_arrays(
        outcomes=np.vstack([treated, controls]),
        features=X,
        treated_mask=np.r_[np.ones(m, bool), np.zeros(n, bool)],
        t0=t0,
    )


def two_sided_panel(
    rng: np.random.Generator,
    units: int = 8,
    t0: int = 10,
    t1: int = 5,
    mix: float = 0.3,
    tau: Callable[[np.ndarray], np.ndarray] | None = None,
) -> PanelDataset:
    """Each side is an exact affine combination of the other, features included.

    Treated rows are W @ controls with W = (1 - mix) I + (mix / units) J, so the
    controls are W^-1 @ treated; the rows of W^-1 sum to one with L1 norm
    (1 + mix (units - 2) / units) / (1 - mix), under 2 for the defaults.
    """
    T = t0 + t1
    controls = 5.0 + rng.normal(size=(units, T))
    mixing = (1.0 - mix) * np.eye(units) + mix / units
    X_control = rng.normal(size=(units, 2))
    X_treated = mixing @ X_control
    treated = mixing @ controls
    if tau is not None:
        treated[:, t0:] += tau(X_treated)[:, None]
    return PanelDataset.from_arrays(
        outcomes=np.vstack([treated, controls]),
        features=np.vstack([X_treated, X_control]),
        treated_mask=np.r_[np.ones(units, bool), np.zeros(units, bool)],
        t0=t0,
    )


def linear_tau(X: np.ndarray) -> np.ndarray:
    return 0.6 * X[:, 0] + 0.4 * X[:, 1]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240517)


@pytest.fixture
def linear_panel(rng) -> PanelDataset:
    return exact_panel(rng, tau=linear_tau)


@pytest.fixture
def null_panel(rng) -> PanelDataset:
    return exact_panel(rng)


@pytest.fixture
def small_panel() -> PanelDataset:
    """2 treated, 3 control, T=6, t0=4; hand-checkable."""
    outcomes = np.array(
        [
            [1.0, 2.0, 3.0, 4.0, 6.0, 7.0],
            [2.0, 2.5, 3.5, 4.5, 7.5, 8.0],
            [0.5, 1.5, 2.5, 3.5, 4.5, 5.5],
            [1.5, 2.5, 3.5, 4.5, 5.5, 6.5],
            [1.0, 1.0, 2.0, 3.0, 3.0, 4.0],
        ]
    )
    features = np.array([[0.1, 1.0], [-0.4, 0.2], [0.3, -0.5], [1.2, 0.7], [-1.0, 0.0]])
    return PanelDataset(
        outcomes=outcomes,
        features=features,
        treated_mask=np.array([True, True, False, False, False]),
        t0=4,
        unit_ids=np.array(["a", "b", "c", "d", "e"]),
    )
