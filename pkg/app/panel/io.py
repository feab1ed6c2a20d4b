"""CSV ingestion and export for long-format panels.

File layout (UTF-8, header row, comma separated)::

    unit_id,period,outcome,treated,x1,...,xd

One row per (unit, period). Periods are positive integers, ``treated`` is
the realised indicator D in {0, 1}. Features must be constant per unit.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, field_validator

from app.errors import PanelError
from app.panel.dataset import PanelDataset

logger = logging.getLogger(__name__)


class ColumnSpec(BaseModel):
    """Column names of a long-format panel file.

    ``feature_cols=None`` takes every remaining column, in file order.
    ``t0=None`` infers the pre-period as ending at the last all-control period.
    """

    unit_col: str = "unit_id"
    period_col: str = "period"
    outcome_col: str = "outcome"
    treated_col: str = "treated"
    feature_cols: list[str] | None = None
    t0: int | None = None

    @field_validator("t0")
    @classmethod
    def t0_positive(cls, v: int | None) -> int | None:
        if v is not None and v < 1:
            raise ValueError("t0 must be >= 1 when given")
        return v


def _line(index: int) -> int:
    """File line number of a data row (header is line 1)."""
    return int(index) + 2


def _numeric_column(df: pd.DataFrame, column: str, what: str) -> pd.Series:
    values = pd.to_numeric(df[column], errors="coerce")
    bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        first = bad.to_numpy().nonzero()[0][0]
        raise PanelError(
            f"Non-numeric {what} {df[column].iloc[first]!r} in column '{column}' at row {_line(first)}"
        )
    return values.astype(float)


def _infer_t0(indicator: np.ndarray) -> int:
    all_control = np.flatnonzero(~indicator.any(axis=0))
    if all_control.size == 0:
        raise PanelError("No pre-treatment period: every period has a treated observation")
    return int(all_control[-1]) + 1


def frame_to_dataset(df: pd.DataFrame, schema: ColumnSpec | None = None) -> PanelDataset:
    """Assemble a ``PanelDataset`` from a long-format frame (already parsed)."""
    schema = schema or ColumnSpec()
    key_cols = [schema.unit_col, schema.period_col, schema.outcome_col, schema.treated_col]

    missing = [c for c in key_cols + (schema.feature_cols or []) if c not in df.columns]
    if missing:
        raise PanelError(f"Missing column(s): {missing}. Found: {list(df.columns)}")

    feature_cols = schema.feature_cols or [c for c in df.columns if c not in key_cols]
    if not feature_cols:
        raise PanelError("No feature columns found")

    df = df.reset_index(drop=True)
    outcome = _numeric_column(df, schema.outcome_col, "outcome")
    period = _numeric_column(df, schema.period_col, "period")
    if ((period % 1 != 0) | (period < 1)).any():
        first = ((period % 1 != 0) | (period < 1)).to_numpy().nonzero()[0][0]
        raise PanelError(f"Period must be a positive integer at row {_line(first)}")
    treated = _numeric_column(df, schema.treated_col, "treated flag")
    if (~treated.isin([0.0, 1.0])).any():
        first = (~treated.isin([0.0, 1.0])).to_numpy().nonzero()[0][0]
        raise PanelError(f"Treated flag must be 0 or 1 at row {_line(first)}")
    features = {c: _numeric_column(df, c, "feature") for c in feature_cols}

    frame = pd.DataFrame(
        {"unit": df[schema.unit_col], "period": period.astype(np.int64), "y": outcome, "d": treated}
        | {f"f{k}": features[c] for k, c in enumerate(feature_cols)}
    )

    dup = frame.duplicated(subset=["unit", "period"])
    if dup.any():
        first = dup.to_numpy().nonzero()[0][0]
        raise PanelError(
            f"Duplicate (unit, period) = ({frame['unit'].iloc[first]!r}, "
            f"{frame['period'].iloc[first]}) at row {_line(first)}"
        )

    units = pd.unique(frame["unit"])
    periods = np.sort(pd.unique(frame["period"]))
    if len(frame) != len(units) * len(periods):
        wide = frame.pivot(index="unit", columns="period", values="y").reindex(units)
        holes = np.argwhere(wide.isna().to_numpy())
        u, p = holes[0]
        raise PanelError(
            f"unbalanced panel: unit {units[u]!r} has no row for period {periods[p]}"
        )

    outcomes = frame.pivot(index="unit", columns="period", values="y").reindex(units)[periods]
    indicator = frame.pivot(index="unit", columns="period", values="d").reindex(units)[periods]
    indicator = indicator.to_numpy(dtype=float) == 1.0

    grouped = frame.groupby("unit", sort=False)
    for k, name in enumerate(feature_cols):
        varying = grouped[f"f{k}"].nunique()
        if (varying > 1).any():
            raise PanelError(
                f"time-varying feature '{name}' for unit {varying[varying > 1].index[0]!r}"
            )
    feature_matrix = grouped[[f"f{k}" for k in range(len(feature_cols))]].first().reindex(units)

    t0 = schema.t0 if schema.t0 is not None else _infer_t0(indicator)
    early = indicator[:, :t0].any(axis=1)
    if early.any():
        raise PanelError(f"treatment before t0 (t0={t0}) for unit {units[np.argmax(early)]!r}")
    treated_mask = indicator[:, t0:].any(axis=1)
    partial = treated_mask & ~indicator[:, t0:].all(axis=1)
    if partial.any():
        raise PanelError(
            f"unit {units[np.argmax(partial)]!r} is not treated in every post period "
            f"(staggered or reversible adoption is not supported)"
        )

    logger.info(
        f"Loaded panel: N={len(units)}, T={len(periods)}, d={len(feature_cols)}, "
        f"t0={t0}, treated={int(treated_mask.sum())}"
    )
    return PanelDataset.from_arrays(
        outcomes=outcomes.to_numpy(dtype=float),
        features=feature_matrix.to_numpy(dtype=float),
        treated_mask=treated_mask,
        t0=t0,
        unit_ids=np.asarray(units),
        feature_names=tuple(feature_cols),
    )


def load_csv(path: str | Path, schema: ColumnSpec | None = None) -> PanelDataset:
    """Read a long-format panel CSV into a ``PanelDataset``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Panel file not found: {path.resolve()}")
    try:
        df = pd.read_csv(path, float_precision="round_trip", skipinitialspace=True)
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise PanelError(f"{path}: unreadable CSV ({e})") from e
    return frame_to_dataset(df, schema)


def dataset_to_frame(dataset: PanelDataset) -> pd.DataFrame:
    """Long-format frame with periods numbered 1..T."""
    n, t = dataset.n_units, dataset.n_periods
    columns = {
        "unit_id": np.repeat(dataset.unit_ids, t),
        "period": np.tile(np.arange(1, t + 1), n),
        "outcome": dataset.outcomes.reshape(-1),
        "treated": dataset.treatment_indicator().reshape(-1).astype(int),
    }
    for k, name in enumerate(dataset.feature_names):
        columns[name] = np.repeat(dataset.features[:, k], t)
    return pd.DataFrame(columns)


def write_csv(dataset: PanelDataset, path: str | Path) -> Path:
    """Write the dataset in the long format ``load_csv`` reads."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dataset_to_frame(dataset).to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Wrote panel to {path} ({dataset.n_units} units x {dataset.n_periods} periods)")
    return path
