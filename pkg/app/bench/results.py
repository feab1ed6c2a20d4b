"""Result files: per-run CSV, JSON manifest, and grouped summaries."""

from __future__ import annotations

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from app import __version__
from app.errors import PanelError
from app.schemas import RESULT_COLUMNS, SUMMARY_COLUMNS, RunResult, SummaryRow

logger = logging.getLogger(__name__)


def summarize(results: list[RunResult]) -> list[SummaryRow]:
    """Group by (scenario, method) in first-seen order; quantiles over ok runs only."""
    groups: dict[tuple[str, str], list[RunResult]] = {}
    for row in results:
        groups.setdefault((row.scenario, row.method), []).append(row)

    summary = []
    for (scenario, method), rows in groups.items():
        mse = np.array([r.mse for r in rows if r.ok], dtype=float)
        stats: dict[str, float | None] = dict.fromkeys(("mean_mse", "median_mse", "q25", "q75"))
        if mse.size:
            q25, median, q75 = np.quantile(mse, [0.25, 0.5, 0.75])
            stats = {
                "mean_mse": float(mse.mean()),
                "median_mse": float(median),
                "q25": float(q25),
                "q75": float(q75),
            }
        summary.append(
            SummaryRow(
                scenario=scenario,
                method=method,
                n_reps=len(rows),
                failure_count=len(rows) - int(mse.size),
                **stats,
            )
        )
    return summary


def _write_frame(rows: list[dict[str, Any]], columns: list[str], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=columns).to_csv(
        path, index=False, float_format="%.17g", lineterminator="\n"
    )
    return path


def manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.manifest.json")


def write_results(
    results: list[RunResult], path: str | Path, manifest: dict[str, Any] | None = None
) -> Path:
    """Write the results CSV and its sibling ``<stem>.manifest.json``."""
    path = _write_frame([r.model_dump() for r in results], RESULT_COLUMNS, Path(path))
    document = {
        "artifact_version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "rows": len(results),
        **(manifest or {}),
    }
    manifest_path(path).write_text(json.dumps(document, indent=2, default=str))
    logger.info(f"Wrote {len(results)} results to {path}")
    return path


def read_results(path: str | Path) -> list[RunResult]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Results file not found: {path.resolve()}")
    try:
        df = pd.read_csv(path, dtype={"seed": str, "status": str}, float_precision="round_trip")
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise PanelError(f"{path}: unreadable results file ({e})") from e
    missing = [c for c in RESULT_COLUMNS if c not in df.columns]
    if missing:
        raise PanelError(f"{path}: missing result column(s) {missing}")

    results = []
    for record in df.to_dict(orient="records"):
        for key in ("mse", "sum_se"):
            if pd.isna(record[key]):
                record[key] = None
        record["seed"] = int(record["seed"])
        results.append(RunResult(**{c: record[c] for c in RESULT_COLUMNS}))
    return results


def write_summary(rows: list[SummaryRow], path: str | Path) -> Path:
    path = _write_frame([r.model_dump() for r in rows], SUMMARY_COLUMNS, Path(path))
    logger.info(f"Wrote {len(rows)} summary rows to {path}")
    return path
