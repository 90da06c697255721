"""Model parameters, radial grids and the field containers shared by every service.

All fields live on a uniform grid of the interval ``[1, R]`` with ``M``
intervals. Velocities are never stored pointwise: a `PhaseState` keeps the
spatial antiderivative ``W`` of the velocity so that white-noise data stays a
bounded function on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Optional

import numpy as np

NODE_TOLERANCE = 1e-9
_BOUNDARY_TOLERANCE = 1e-10


def is_admissible(n: int, k: int) -> bool:
    """Return True for degree/equivariance pairs the lab supports."""

    return (n >= 0 and k >= 1) or (n == 0 and k == 0)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid ``r_i = 1 + i h`` on ``[1, R]``."""

    R: float
    M: int

    def __post_init__(self) -> None:
        if not self.R > 1.0:
            raise ValueError(f"outer radius must exceed 1, got R={self.R}")
        if self.M < 2:
            raise ValueError(f"grid needs at least 2 intervals, got M={self.M}")

    @property
    def h(self) -> float:
        return (self.R - 1.0) / self.M

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = 1.0 + self.h * np.arange(self.M + 1, dtype=float)
        nodes[-1] = self.R
        nodes.setflags(write=False)
        return nodes

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def size(self) -> int:
        return self.M + 1

    def index_of(self, r: float) -> int:
        """Return the node index of ``r``; raises if ``r`` is not a grid node."""

        position = (r - 1.0) / self.h
        index = int(round(position))
        if abs(position - index) > NODE_TOLERANCE * max(1.0, abs(position)) or not 0 <= index <= self.M:
            raise ValueError(f"r={r} is not a node of the grid on [1, {self.R}] with h={self.h}")
        return index

    def subgrid(self, L: float) -> "RadialGrid":
        """Grid on ``[1, L]`` sharing this grid's spacing."""

        index = self.index_of(L)
        if index < 2:
            raise ValueError(f"sub-interval [1, {L}] holds fewer than two grid intervals")
        return RadialGrid(R=float(self.nodes[index]), M=index)

    def matches(self, other: "RadialGrid") -> bool:
        return self.M == other.M and math.isclose(self.R, other.R, rel_tol=1e-12, abs_tol=1e-12)


@dataclass(frozen=True)
class ModelParams:
    """Degree ``n``, equivariance ``k``, outer radius ``R``, resolution ``M`` and truncation ``N``."""

    n: int = 1
    k: int = 1
    R: float = 40.0
    M: int = 1024
    N: Optional[int] = None

    def __post_init__(self) -> None:
        if not is_admissible(self.n, self.k):
            raise ValueError(
                f"(n, k)=({self.n}, {self.k}) is not admissible: need n >= 0 and k >= 1, or n = k = 0"
            )
        if not self.R > 1.0:
            raise ValueError(f"outer radius must exceed 1, got R={self.R}")
        if self.M < 2:
            raise ValueError(f"grid needs at least 2 intervals, got M={self.M}")
        if self.N is not None and self.N < 1:
            raise ValueError(f"truncation N must be >= 1, got N={self.N}")

    @property
    def h(self) -> float:
        return (self.R - 1.0) / self.M

    @property
    def coupling(self) -> int:
        """The recurring constant ``k(k+1)``."""

        return self.k * (self.k + 1)

    def grid(self) -> RadialGrid:
        return RadialGrid(R=float(self.R), M=int(self.M))

    def with_radius(self, R: float) -> "ModelParams":
        """Same model and spacing on ``[1, R]`` (``R - 1`` is rounded to whole grid steps)."""

        M = max(2, int(round((R - 1.0) / self.h)))
        return ModelParams(n=self.n, k=self.k, R=1.0 + M * self.h, M=M, N=self.N)

    def with_resolution(self, M: int) -> "ModelParams":
        return ModelParams(n=self.n, k=self.k, R=self.R, M=M, N=self.N)

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "k": self.k, "R": self.R, "M": self.M, "N": self.N}


@dataclass(frozen=True, eq=False)
class Field:
    """Real node values on a `RadialGrid`."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise ValueError(f"field needs {self.grid.size} node values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "Field":
        return cls(grid=grid, values=np.zeros(grid.size))

    @classmethod
    def from_function(cls, grid: RadialGrid, func) -> "Field":
        return cls(grid=grid, values=np.asarray(func(grid.nodes), dtype=float))

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def __len__(self) -> int:
        return self.grid.size

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(grid=self.grid, values=values)

    def scaled(self, factor: float) -> "Field":
        return Field(grid=self.grid, values=factor * self.values)

    def at(self, r: float) -> float:
        """Linear interpolation of the field at ``r``."""

        return float(np.interp(r, self.grid.nodes, self.values))


def _scale(values: np.ndarray) -> float:
    return 1.0 + float(np.max(np.abs(values))) if values.size else 1.0


@dataclass(frozen=True, eq=False)
class PhaseState:
    """Position ``psi`` and velocity antiderivative ``W`` at time ``time``."""

    psi: Field
    W: Field
    time: float = 0.0
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.psi.grid.matches(self.W.grid):
            raise ValueError("psi and W must live on the same grid")
        tol = _BOUNDARY_TOLERANCE * _scale(self.psi.values)
        if abs(self.psi.values[0]) > tol or abs(self.psi.values[-1]) > tol:
            raise ValueError("psi must vanish at r=1 and r=R")
        if abs(self.W.values[0]) > _BOUNDARY_TOLERANCE * _scale(self.W.values):
            raise ValueError("velocity antiderivative W must vanish at r=1")

    @classmethod
    def from_arrays(cls, grid: RadialGrid, psi: np.ndarray, W: np.ndarray, time: float = 0.0) -> "PhaseState":
        psi = np.array(psi, dtype=float)
        W = np.array(W, dtype=float)
        psi[0] = 0.0
        psi[-1] = 0.0
        W[0] = 0.0
        return cls(psi=Field(grid, psi), W=Field(grid, W), time=time)

    @classmethod
    def at_rest(cls, psi: Field) -> "PhaseState":
        return cls(psi=psi, W=Field.zeros(psi.grid))

    @property
    def grid(self) -> RadialGrid:
        return self.psi.grid


__all__ = [
    "Field",
    "ModelParams",
    "NODE_TOLERANCE",
    "PhaseState",
    "RadialGrid",
    "is_admissible",
]
