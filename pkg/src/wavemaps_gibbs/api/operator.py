"""Green's function routes."""

from __future__ import annotations

from typing import Any

from fastapi import APIRouter, Depends

from wavemaps_gibbs.api.params import model_params
from wavemaps_gibbs.core.grid import ModelParams
from wavemaps_gibbs.core.io import to_jsonable
from wavemaps_gibbs.services.operator import build_greens_report
from wavemaps_gibbs.services.soliton import load_soliton

router = APIRouter(prefix="/api", tags=["operator"])


@router.get("/greens", summary="Green's matrix diagnostics")
async def greens_summary(params: ModelParams = Depends(model_params)) -> dict[str, Any]:
    """Return symmetry defect, bound constants, ``R0`` and the Hardy probe for ``(n, k, R, M)``."""

    payload, _ = build_greens_report(params, load_soliton(params))
    return to_jsonable(payload)


__all__ = ["router"]
