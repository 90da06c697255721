"""Shared query parsing for the model parameters."""

from __future__ import annotations

from fastapi import HTTPException, Query

from wavemaps_gibbs.core.grid import ModelParams

MAX_NODES = 2048


def model_params(
    n: int = Query(1, ge=0, description="Degree of the wave map"),
    k: int = Query(1, ge=0, description="Equivariance class"),
    R: float = Query(20.0, gt=1.0, le=200.0, description="Outer radius"),
    M: int = Query(190, ge=2, le=MAX_NODES, description="Number of grid intervals"),
) -> ModelParams:
    try:
        return ModelParams(n=n, k=k, R=R, M=M)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


__all__ = ["MAX_NODES", "model_params"]
