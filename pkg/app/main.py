"""HTE estimation service: FastAPI app over the method registry.

Loads config.yaml (or ``$HTE_CONFIG``) on startup. Exposes
/estimate/{method} for fitting a learner to a posted panel, plus operational
endpoints for health, method listing, config viewing, and hot-reload.
"""

from __future__ import annotations

import logging
import os
from contextlib import asynccontextmanager

import numpy as np
import pandas as pd
from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware

from app import __version__
from app.config import get_config, load_config, reload_config
from app.errors import HteError
from app.learners.registry import METHOD_REGISTRY, run_method
from app.panel.io import ColumnSpec, frame_to_dataset
from app.schemas import EstimateRequest, EstimateResponse, UnitEstimate

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

CONFIG_PATH = os.environ.get("HTE_CONFIG", "config.yaml")


@asynccontextmanager
async def lifespan(app: FastAPI):
    config = load_config(CONFIG_PATH, missing_ok=True)
    logger.info(
        f"HTE service started (origins={config.allowed_origins}, "
        f"auth={'enabled' if config.api_key else 'disabled'}, methods={len(METHOD_REGISTRY)})"
    )
    yield
    logger.info("HTE service shutting down")


# CORS origins are read before the lifespan runs
_boot_config = load_config(CONFIG_PATH, missing_ok=True)

app = FastAPI(title="Synthetic HTE", version=__version__, lifespan=lifespan)

app.add_middleware(
    CORSMiddleware,
    allow_origins=_boot_config.allowed_origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# ---------------------------------------------------------------------------
# Auth dependency
# ---------------------------------------------------------------------------


async def verify_api_key(request: Request) -> None:
    """Reject requests whose X-API-Key differs from ``api_key``; no key configured means open access."""
    config = get_config()
    if not config.api_key:
        return

    key = request.headers.get("X-API-Key")
    if key != config.api_key:
        raise HTTPException(status_code=401, detail="Invalid or missing API key")


def _plain(value):
    return value.item() if isinstance(value, np.generic) else value


# ---------------------------------------------------------------------------
# Estimation endpoint
# ---------------------------------------------------------------------------


@app.post(
    "/estimate/{method}",
    response_model=EstimateResponse,
    dependencies=[Depends(verify_api_key)],
)
def estimate(method: str, request: EstimateRequest, seed: int = 0) -> EstimateResponse:
    """Fit ``method`` on the posted long-format panel and return tau_hat per unit."""
    if method not in METHOD_REGISTRY:
        raise HTTPException(
            status_code=404,
            detail=f"Unknown method '{method}'. Available: {list(METHOD_REGISTRY.keys())}",
        )

    config = get_config()
    try:
        dataset = frame_to_dataset(pd.DataFrame.from_records(request.records), ColumnSpec(t0=request.t0))
        result = run_method(method, dataset, config.context(seed=seed, regressor=request.regressor))
        tau_hat = result.evaluate(dataset.features)
    except HteError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        logger.error(f"Estimate '{method}' failed: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Estimate failed: {e}")

    return EstimateResponse(
        method=method,
        units=[
            UnitEstimate(unit_id=_plain(uid), features=row.tolist(), tau_hat=float(tau))
            for uid, row, tau in zip(dataset.unit_ids, dataset.features, tau_hat)
        ],
        diagnostics=result.diagnostics,
    )


# ---------------------------------------------------------------------------
# Operational endpoints
# ---------------------------------------------------------------------------


@app.get("/methods")
async def list_methods():
    return {
        name: {"family": m.family, "description": m.description}
        for name, m in METHOD_REGISTRY.items()
    }


@app.get("/health")
async def health():
    """Liveness plus the active weight constraint."""
    config = get_config()
    return {
        "status": "healthy",
        "methods": len(METHOD_REGISTRY),
        "constraint": config.solver.constraint,
    }


@app.get("/config")
async def get_current_config():
    """Active settings, api_key omitted."""
    return get_config().model_dump(exclude={"api_key"})


@app.post("/reload", dependencies=[Depends(verify_api_key)])
async def reload():
    """Re-read the settings file; estimates that follow use the new values."""
    try:
        new_config = reload_config()
        return {"status": "reloaded", "methods": new_config.bench.methods}
    except Exception as e:
        logger.error(f"Reload failed: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Reload failed: {e}")
