"""Conversion between the shifted unknown ``psi`` and the angle ``phi = Q + psi / r``."""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_trapezoid

from wavemaps_gibbs.core.grid import Field, PhaseState


def to_phi(state: PhaseState, Q: Field) -> tuple[Field, Field]:
    """Return ``(phi, Phi)`` where ``Phi`` is the antiderivative of ``d phi / dt``.

    ``Phi = int_1^r W'(s)/s ds`` is computed by parts as
    ``W/r + int_1^r W/s^2 ds`` so the velocity is never differentiated.
    """

    if not state.grid.matches(Q.grid):
        raise ValueError("profile and state grids differ")
    r = state.grid.nodes
    phi = Q.values + state.psi.values / r
    W = state.W.values
    Phi = W / r + cumulative_trapezoid(W / r**2, r, initial=0.0)
    return Field(state.grid, phi), Field(state.grid, Phi)


def from_phi(phi: Field, Phi: Field, Q: Field, time: float = 0.0) -> PhaseState:
    """Inverse of `to_phi`; ``W = r Phi - int_1^r Phi``."""

    if not (phi.grid.matches(Q.grid) and Phi.grid.matches(Q.grid)):
        raise ValueError("profile and field grids differ")
    r = Q.grid.nodes
    psi = r * (phi.values - Q.values)
    W = r * Phi.values - cumulative_trapezoid(Phi.values, r, initial=0.0)
    return PhaseState.from_arrays(Q.grid, psi, W, time=time)


def shifted_energy_density(phi: np.ndarray, coupling: int, r: np.ndarray) -> np.ndarray:
    """Pointwise ``r^2 (d_r phi)^2 + coupling sin^2(phi)`` on node values."""

    gradient = np.gradient(phi, r, edge_order=2)
    return r**2 * gradient**2 + coupling * np.sin(phi) ** 2


__all__ = ["from_phi", "shifted_energy_density", "to_phi"]
