"""Reflection extensions off ``[1, R]`` and restrictions onto sub-intervals.

A function vanishing at both endpoints extends to the whole line as the odd
double reflection across ``r = 1`` and ``r = R``; the result has period
``2(R - 1)``. Antiderivatives of such extensions are even reflections, which is
how velocity antiderivatives are carried across the boundary.
"""

from __future__ import annotations

import numpy as np

from wavemaps_gibbs.core.grid import Field, RadialGrid

_SNAP_TOLERANCE = 1e-8


def fold_array(x: np.ndarray, R: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised `extend_fold`: folded points in ``[1, R]`` and reflection signs."""

    if not R > 1.0:
        raise ValueError(f"outer radius must exceed 1, got R={R}")
    x = np.asarray(x, dtype=float)
    width = R - 1.0
    phase = np.mod(x - 1.0, 2.0 * width)
    inside = phase <= width
    folded = np.where(inside, 1.0 + phase, 1.0 + 2.0 * width - phase)
    sign = np.where(inside, 1.0, -1.0)
    return folded, sign


def extend_fold(x: float, R: float) -> tuple[float, int]:
    """Return ``(ext_R(x), sign)`` so that ``(Ext_R f)(x) = sign * f(ext_R(x))``."""

    if 1.0 <= x <= R:
        return float(x), 1
    folded, sign = fold_array(np.array([x]), R)
    return float(folded[0]), int(sign[0])


def interpolate_rows(values: np.ndarray, grid: RadialGrid, x: np.ndarray) -> np.ndarray:
    """Linear interpolation of node values (last axis) at points ``x`` in ``[1, R]``.

    Points within a relative ``1e-8`` of a node take the node value exactly, so
    light-cone traversals with ``t`` a multiple of ``h`` transport values without
    interpolation error.
    """

    values = np.asarray(values, dtype=float)
    position = (np.asarray(x, dtype=float) - 1.0) / grid.h
    nearest = np.rint(position)
    position = np.where(np.abs(position - nearest) < _SNAP_TOLERANCE, nearest, position)
    position = np.clip(position, 0.0, float(grid.M))
    index = np.minimum(np.floor(position).astype(int), grid.M - 1)
    weight = position - index
    return values[..., index] * (1.0 - weight) + values[..., index + 1] * weight


def odd_extension(values: np.ndarray, grid: RadialGrid, x: np.ndarray) -> np.ndarray:
    folded, sign = fold_array(x, grid.R)
    return sign * interpolate_rows(values, grid, folded)


def even_extension(values: np.ndarray, grid: RadialGrid, x: np.ndarray) -> np.ndarray:
    folded, _ = fold_array(x, grid.R)
    return interpolate_rows(values, grid, folded)


def restrict(f: Field, L: float) -> Field:
    """``f`` on the sub-interval ``[1, L]``."""

    grid = f.grid.subgrid(L)
    return Field(grid=grid, values=f.values[: grid.size])


def restrict0_values(values: np.ndarray, grid: RadialGrid, L: float, vanishing: bool = False) -> np.ndarray:
    """Batched `restrict0` on node values; returns values on the ``[1, L]`` subgrid."""

    if L < 2.0:
        raise ValueError(f"restrict0 needs L >= 2 so that [L-1, L] lies in [1, L], got L={L}")
    sub = grid.subgrid(L)
    values = np.array(np.asarray(values, dtype=float)[..., : sub.size])
    nodes = sub.nodes
    start = interpolate_rows(values, sub, np.array([L - 1.0]))[..., 0]
    end = np.zeros_like(start) if vanishing else values[..., -1]
    ramp = nodes >= L - 1.0 - 1e-12
    offset = nodes[ramp] - (L - 1.0)
    values[..., ramp] = start[..., None] + offset * (end - start)[..., None]
    return values


def restrict0(f: Field, L: float, vanishing: bool = False) -> Field:
    """Restriction to ``[1, L]`` with a linear ramp on ``[L - 1, L]``.

    The default ramp runs from ``f(L-1)`` to ``f(L)``. With ``vanishing=True``
    the ramp ends at zero, so the result satisfies the Dirichlet condition at
    ``r = L``.
    """

    grid = f.grid.subgrid(L)
    return Field(grid=grid, values=restrict0_values(f.values, f.grid, L, vanishing=vanishing))


__all__ = [
    "even_extension",
    "extend_fold",
    "fold_array",
    "interpolate_rows",
    "odd_extension",
    "restrict",
    "restrict0",
    "restrict0_values",
]
