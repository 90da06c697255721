"""Discrete weighted Hölder norms on uniform radial grids."""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_trapezoid

from wavemaps_gibbs.core.grid import Field


def _check_exponents(alpha: float, kappa: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"Hölder exponent alpha must lie in [0, 1), got {alpha}")
    if kappa > 0.0:
        raise ValueError(f"weight exponent kappa must be <= 0, got {kappa}")


def holder_terms(values: np.ndarray, nodes: np.ndarray, alpha: float, kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """Return the weighted sup term and the weighted difference-quotient term.

    ``values`` may carry leading batch axes; the reduction runs over the last
    axis. The pair scan walks node offsets so every difference is formed once.
    """

    _check_exponents(alpha, kappa)
    values = np.asarray(values, dtype=float)
    nodes = np.asarray(nodes, dtype=float)
    if values.shape[-1] != nodes.shape[0]:
        raise ValueError("values and nodes disagree on the grid size")

    weight = nodes**kappa
    sup_term = np.max(np.abs(values) * weight, axis=-1)
    pair_term = np.zeros(values.shape[:-1])
    size = nodes.shape[0]
    for offset in range(1, size):
        diff = values[..., offset:] - values[..., :-offset]
        distance = nodes[offset:] - nodes[:-offset]
        # nodes increase, so the larger radius of each pair is the right-hand node
        quotient = np.abs(diff) * weight[offset:] / distance**alpha
        pair_term = np.maximum(pair_term, np.max(quotient, axis=-1))
    return sup_term, pair_term


def holder_norm_values(values: np.ndarray, nodes: np.ndarray, alpha: float, kappa: float) -> np.ndarray:
    sup_term, pair_term = holder_terms(values, nodes, alpha, kappa)
    return sup_term + pair_term


def holder_norm_C0(f: Field, alpha: float, kappa: float) -> float:
    """Weighted C^{0, alpha, kappa} norm of a field evaluated on its grid nodes."""

    return float(holder_norm_values(f.values, f.grid.nodes, alpha, kappa))


def antiderivative_values(values: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Trapezoid antiderivative ``r -> int_1^r f`` along the last axis."""

    return cumulative_trapezoid(values, nodes, axis=-1, initial=0.0)


def antiderivative(f: Field) -> Field:
    return f.with_values(antiderivative_values(f.values, f.grid.nodes))


def holder_norm_Cm1(f: Field, alpha: float, kappa: float) -> float:
    """Weighted C^{-1, alpha, kappa} norm: the C^0 norm of the antiderivative.

    Velocities stored as antiderivatives ``W`` go through `holder_norm_C0`
    directly.
    """

    _check_exponents(alpha, kappa)
    return holder_norm_C0(antiderivative(f), alpha, kappa)


__all__ = [
    "antiderivative",
    "antiderivative_values",
    "holder_norm_C0",
    "holder_norm_Cm1",
    "holder_norm_values",
    "holder_terms",
]
