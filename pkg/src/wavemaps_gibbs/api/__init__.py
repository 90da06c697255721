"""API routers for the lab's read-only HTTP surface."""

from .main import router as core_router
from .measures import router as measures_router
from .operator import router as greens_router
from .soliton import router as soliton_router

__all__ = ["core_router", "greens_router", "measures_router", "soliton_router"]
