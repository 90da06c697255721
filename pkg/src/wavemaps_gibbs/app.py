"""FastAPI application factory for the lab's read-only HTTP surface."""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from wavemaps_gibbs.api import core_router, greens_router, measures_router, soliton_router
from wavemaps_gibbs.config import PACKAGE_VERSION


def create_app() -> FastAPI:
    app = FastAPI(title="Wavemaps Gibbs Lab", version=PACKAGE_VERSION)

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    app.include_router(core_router)
    app.include_router(soliton_router)
    app.include_router(greens_router)
    app.include_router(measures_router)
    return app


app = create_app()


__all__ = ["app", "create_app"]
