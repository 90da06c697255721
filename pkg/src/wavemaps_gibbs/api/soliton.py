"""Soliton routes."""

from __future__ import annotations

from typing import Any

from fastapi import APIRouter, Depends, Query

from wavemaps_gibbs.api.params import model_params
from wavemaps_gibbs.core.grid import ModelParams
from wavemaps_gibbs.core.io import to_jsonable
from wavemaps_gibbs.services.soliton import DEFAULT_R_FAR, MIN_R_FAR, build_soliton_report, load_soliton

router = APIRouter(prefix="/api", tags=["soliton"])


@router.get("/soliton", summary="Soliton profile summary")
async def soliton_summary(
    params: ModelParams = Depends(model_params),
    R_far: float = Query(DEFAULT_R_FAR, ge=MIN_R_FAR, le=1000.0),
) -> dict[str, Any]:
    """Return the asymptotic coefficient, tail slope, energy and residuals of ``Q_{n,k}``."""

    return to_jsonable(build_soliton_report(load_soliton(params, max(R_far, params.R))))


__all__ = ["router"]
