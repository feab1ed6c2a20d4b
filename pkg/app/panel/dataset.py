"""Panel data model: outcomes, time-invariant features, treatment bookkeeping.

A ``PanelDataset`` holds an N x T outcome matrix, an N x d feature matrix,
a treated mask and the number of pre-treatment periods ``t0``. Adoption is
simultaneous: D[i, t] = treated[i] and t > t0, nothing else.

Arrays are frozen (``writeable=False``) after construction so a dataset can
be shared by concurrent readers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from app.errors import PanelError


class UnitSide(str, Enum):
    """Which block of the panel a unit belongs to."""

    TREATED = "treated"
    CONTROL = "control"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PanelDataset:
    outcomes: np.ndarray          # N x T
    features: np.ndarray          # N x d
    treated_mask: np.ndarray      # N, bool
    t0: int                       # number of pre-treatment periods
    unit_ids: np.ndarray | None = None  # original ids, row-aligned
    feature_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        outcomes = np.asarray(self.outcomes, dtype=float)
        features = np.asarray(self.features, dtype=float)
        mask = np.asarray(self.treated_mask, dtype=bool)

        if outcomes.ndim != 2:
            raise PanelError(f"outcomes must be a 2-D matrix, got shape {outcomes.shape}")
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        if features.ndim != 2 or features.shape[0] != outcomes.shape[0]:
            raise PanelError(
                f"features must have one row per unit ({outcomes.shape[0]}), got shape {features.shape}"
            )
        if mask.shape != (outcomes.shape[0],):
            raise PanelError(
                f"treated_mask must have length {outcomes.shape[0]}, got shape {mask.shape}"
            )

        unit_ids = self.unit_ids
        if unit_ids is None:
            unit_ids = np.arange(outcomes.shape[0])
        unit_ids = np.asarray(unit_ids)
        if unit_ids.shape != (outcomes.shape[0],):
            raise PanelError(f"unit_ids must have length {outcomes.shape[0]}")

        names = tuple(self.feature_names) or tuple(f"x{k + 1}" for k in range(features.shape[1]))
        if len(names) != features.shape[1]:
            raise PanelError(
                f"feature_names has {len(names)} entries for {features.shape[1]} feature columns"
            )

        object.__setattr__(self, "outcomes", _frozen(outcomes))
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "treated_mask", _frozen(mask))
        object.__setattr__(self, "unit_ids", _frozen(unit_ids))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "t0", int(self.t0))

    @classmethod
    def from_arrays(
        cls,
        outcomes: np.ndarray,
        features: np.ndarray,
        treated_mask: np.ndarray,
        t0: int,
        unit_ids: np.ndarray | None = None,
        feature_names: tuple[str, ...] = (),
    ) -> PanelDataset:
        """Build a dataset with units reordered treated-first (stable).

        Original ids are kept row-aligned in ``unit_ids``; when none are given
        they are the input row positions.
        """
        mask = np.asarray(treated_mask, dtype=bool)
        if unit_ids is None:
            unit_ids = np.arange(mask.shape[0])
        order = np.concatenate([np.flatnonzero(mask), np.flatnonzero(~mask)])
        return cls(
            outcomes=np.asarray(outcomes, dtype=float)[order],
            features=np.asarray(features, dtype=float).reshape(mask.shape[0], -1)[order],
            treated_mask=mask[order],
            t0=t0,
            unit_ids=np.asarray(unit_ids)[order],
            feature_names=feature_names,
        )

    # -- shape bookkeeping -------------------------------------------------

    @property
    def n_units(self) -> int:
        return self.outcomes.shape[0]

    @property
    def n_periods(self) -> int:
        return self.outcomes.shape[1]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def t1(self) -> int:
        """Number of post-treatment periods."""
        return self.n_periods - self.t0

    @property
    def treated_idx(self) -> np.ndarray:
        return np.flatnonzero(self.treated_mask)

    @property
    def control_idx(self) -> np.ndarray:
        return np.flatnonzero(~self.treated_mask)

    @property
    def m(self) -> int:
        return int(self.treated_mask.sum())

    @property
    def n(self) -> int:
        return self.n_units - self.m

    @property
    def pre_outcomes(self) -> np.ndarray:
        return self.outcomes[:, : self.t0]

    @property
    def post_outcomes(self) -> np.ndarray:
        return self.outcomes[:, self.t0 :]

    def side_of(self, row: int) -> UnitSide:
        return UnitSide.TREATED if self.treated_mask[row] else UnitSide.CONTROL

    def rows(self, side: UnitSide) -> np.ndarray:
        return self.treated_idx if side is UnitSide.TREATED else self.control_idx

    def treatment_indicator(self) -> np.ndarray:
        """D[i, t] = treated[i] and t > t0, as an N x T boolean matrix."""
        post = np.arange(1, self.n_periods + 1) > self.t0
        return self.treated_mask[:, None] & post[None, :]


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(dataset: PanelDataset) -> ValidationReport:
    """Check the dataset's invariants; never raises, never mutates."""
    report = ValidationReport()
    v = report.violations

    if dataset.n_units < 2:
        v.append(f"fewer than 2 units (N={dataset.n_units})")
    if dataset.n_periods < 2:
        v.append(f"fewer than 2 periods (T={dataset.n_periods})")
    if dataset.n_features < 1:
        v.append("no feature columns (d=0)")
    if not np.all(np.isfinite(dataset.outcomes)):
        v.append("non-finite outcome values")
    if not np.all(np.isfinite(dataset.features)):
        v.append("non-finite feature values")
    if dataset.t0 < 1:
        v.append(f"no pre-period (t0={dataset.t0})")
    if dataset.t0 > dataset.n_periods - 1:
        v.append(f"no post-period (t0={dataset.t0}, T={dataset.n_periods})")
    if dataset.m < 1:
        v.append("no treated units")
    if dataset.n < 1:
        v.append("no control units")

    return report


def require_valid(dataset: PanelDataset) -> PanelDataset:
    """Raise ``PanelError`` listing every violated invariant, else return the dataset."""
    report = validate(dataset)
    if not report.ok:
        raise PanelError("Invalid panel: " + "; ".join(report.violations))
    return dataset
