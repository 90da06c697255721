"""d'Alembert propagation and the Duhamel integral on ``[1, R]`` with Dirichlet walls."""

from __future__ import annotations

import numpy as np
from scipy.integrate import trapezoid

from wavemaps_gibbs.core.extension import even_extension, odd_extension
from wavemaps_gibbs.core.grid import Field, RadialGrid
from wavemaps_gibbs.core.holder import antiderivative_values


def dalembert_values(position: np.ndarray, antiderivative: np.ndarray, grid: RadialGrid, t: float) -> np.ndarray:
    """Free wave solution at time ``t`` for batched position and velocity-antiderivative rows."""

    nodes = grid.nodes
    ahead = nodes + t
    behind = nodes - t
    transported = 0.5 * (odd_extension(position, grid, ahead) + odd_extension(position, grid, behind))
    swept = 0.5 * (even_extension(antiderivative, grid, ahead) - even_extension(antiderivative, grid, behind))
    return transported + swept


def dalembert_linear(f: Field, W: Field, t: float) -> Field:
    """Solve the free wave equation with data ``(f, dW/dr)`` and return ``u(t, .)``."""

    if not f.grid.matches(W.grid):
        raise ValueError("position and velocity antiderivative must share a grid")
    values = dalembert_values(f.values, W.values, f.grid, t)
    values[..., 0] = 0.0
    values[..., -1] = 0.0
    return f.with_values(values)


def duhamel_values(history: np.ndarray, grid: RadialGrid, t: float) -> np.ndarray:
    """Duhamel integral for a forcing sampled at ``J + 1`` equally spaced times on ``[0, t]``.

    ``history`` has shape ``(J + 1, ..., M + 1)``. The inner light-cone integral
    is the even-reflected antiderivative of each time slice evaluated at
    ``r +- (t - s)``; the outer integral is the trapezoid rule in ``s``.
    """

    history = np.asarray(history, dtype=float)
    steps = history.shape[0] - 1
    if steps < 1 or t == 0.0:
        return np.zeros(history.shape[1:])
    dt = t / steps
    nodes = grid.nodes
    inner = np.empty_like(history)
    for j in range(steps + 1):
        lag = t - j * dt
        primitive = antiderivative_values(history[j], nodes)
        inner[j] = even_extension(primitive, grid, nodes + lag) - even_extension(primitive, grid, nodes - lag)
    return 0.5 * trapezoid(inner, dx=dt, axis=0)


def duhamel(history: np.ndarray, grid: RadialGrid, t: float) -> Field:
    values = duhamel_values(history, grid, t)
    if values.ndim != 1:
        raise ValueError("duhamel expects a single space-time field; use duhamel_values for batches")
    values[0] = 0.0
    values[-1] = 0.0
    return Field(grid=grid, values=values)


__all__ = ["dalembert_linear", "dalembert_values", "duhamel", "duhamel_values"]
