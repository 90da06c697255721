"""Gaussian-measure routes."""

from __future__ import annotations

from typing import Any

from fastapi import APIRouter, Depends, Query

from wavemaps_gibbs.api.params import model_params
from wavemaps_gibbs.core.grid import ModelParams
from wavemaps_gibbs.core.io import to_jsonable
from wavemaps_gibbs.services.measures import DEFAULT_EPS, GaussianSampler, build_measures_report
from wavemaps_gibbs.services.operator import assemble, eigendecompose
from wavemaps_gibbs.services.soliton import load_soliton

router = APIRouter(prefix="/api/measures", tags=["measures"])


@router.get("/diagnostics", summary="Growth and Hölder diagnostics of a Gaussian ensemble")
async def measure_diagnostics(
    params: ModelParams = Depends(model_params),
    samples: int = Query(200, ge=1, le=5000),
    seed: int = Query(42, ge=0),
    eps: float = Query(DEFAULT_EPS, gt=0.0, lt=0.5),
) -> dict[str, Any]:
    sampler = GaussianSampler(basis=eigendecompose(assemble(params, load_soliton(params))), params=params)
    return to_jsonable(build_measures_report(sampler, seed, samples, eps))


__all__ = ["router"]
