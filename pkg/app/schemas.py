"""Request/response models: the contract between engine and clients.

``RunResult`` / ``SummaryRow`` are the rows of the bench CSV files;
``EstimateRequest`` / ``EstimateResponse`` are the HTTP estimate bodies.
"""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, Field, model_validator

from app.regress import RegressorSpec

RESULT_COLUMNS = ["scenario", "method", "replication", "seed", "mse", "sum_se", "wall_time_ms", "status"]
SUMMARY_COLUMNS = [
    "scenario", "method", "n_reps", "mean_mse", "median_mse", "q25", "q75", "failure_count",
]


class RunResult(BaseModel):
    """One (replication, method) outcome.

    status is ``"ok"`` or ``"failed: <reason>"``; failed rows carry no scores.
    """

    scenario: str
    method: str
    replication: int
    seed: int
    mse: float | None = None
    sum_se: float | None = None
    wall_time_ms: int = 0
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @model_validator(mode="after")
    def scores_when_ok(self) -> RunResult:
        if self.ok and (self.mse is None or self.sum_se is None or self.mse < 0 or self.sum_se < 0):
            raise ValueError("an ok result needs non-negative mse and sum_se")
        return self


class SummaryRow(BaseModel):
    scenario: str
    method: str
    n_reps: int
    mean_mse: float | None = None
    median_mse: float | None = None
    q25: float | None = None
    q75: float | None = None
    failure_count: int = 0


class EstimateRequest(BaseModel):
    """Long-format panel rows (``unit_id, period, outcome, treated, x1..xd``)."""

    records: list[dict[str, Any]] = Field(min_length=1)
    t0: int | None = None
    regressor: RegressorSpec | None = None


class UnitEstimate(BaseModel):
    unit_id: Any
    features: list[float]
    tau_hat: float


class EstimateResponse(BaseModel):
    method: str
    units: list[UnitEstimate]
    diagnostics: dict[str, Any] = {}
