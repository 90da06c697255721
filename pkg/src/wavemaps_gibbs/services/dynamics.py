"""Time integration of ``psi_tt - psi_rr = -F(psi)`` on ``[1, R]`` with Dirichlet walls.

Three forcings share one integrator: the full nonlinearity
``F(u) = k(k+1)/(2r) (sin(2Q + 2u/r) - sin 2Q)``, its Galerkin truncation
``P_N F(P_N u)`` and the linearisation ``k(k+1) cos(2Q) u / r^2``.

The ``cfl1`` scheme runs at ``dt = h``, where the three-level update
``u_{i+1} + u_{i-1} - u^{m-1}`` transports free waves exactly. Its first step is
the exact d'Alembert solution for the antiderivative velocity plus a Duhamel
correction for the frozen forcing, so white-noise velocities are never
differentiated. ``leapfrog`` is the ordinary central scheme with
``dt <= 0.9 h`` and a Taylor first step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Literal, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from wavemaps_gibbs.core.extension import restrict0_values
from wavemaps_gibbs.core.grid import Field, PhaseState, RadialGrid
from wavemaps_gibbs.core.io import write_ensemble_binary, write_json
from wavemaps_gibbs.core.variables import shifted_energy_density
from wavemaps_gibbs.core.wave import dalembert_values, duhamel_values
from wavemaps_gibbs.services.gibbs import AnharmonicPotential, project_values
from wavemaps_gibbs.services.operator import SpectralBasis
from wavemaps_gibbs.services.soliton import SolitonProfile

logger = logging.getLogger(__name__)

Scheme = Literal["cfl1", "leapfrog"]
FlowKind = Literal["full", "truncated", "linear"]
LEAPFROG_MAX_COURANT = 0.9
_TIME_TOLERANCE = 1e-9


class CFLViolationError(ValueError):
    """The requested time step breaks the scheme's Courant condition."""


@dataclass(frozen=True)
class FlowConfig:
    T: float = 1.0
    dt: Optional[float] = None
    scheme: Scheme = "cfl1"
    N: Optional[int] = None
    snapshots: tuple[float, ...] = ()
    track_energy: bool = False

    def __post_init__(self) -> None:
        if self.T < 0.0:
            raise ValueError(f"final time must be non-negative, got T={self.T}")
        if self.scheme not in ("cfl1", "leapfrog"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.N is not None and self.N < 1:
            raise ValueError(f"truncation N must be positive, got {self.N}")
        object.__setattr__(self, "snapshots", tuple(sorted(float(t) for t in self.snapshots)))

    def step(self, grid: RadialGrid) -> float:
        h = grid.h
        if self.scheme == "cfl1":
            if self.dt is not None and not math.isclose(self.dt, h, rel_tol=1e-12):
                raise CFLViolationError(f"cfl1 runs at dt = h = {h:.6g}, got dt={self.dt:.6g}")
            return h
        dt = 0.5 * h if self.dt is None else float(self.dt)
        if not 0.0 < dt <= LEAPFROG_MAX_COURANT * h * (1.0 + 1e-12):
            raise CFLViolationError(f"leapfrog needs 0 < dt <= {LEAPFROG_MAX_COURANT} h = {LEAPFROG_MAX_COURANT * h:.6g}")
        return dt

    def with_time(self, T: float) -> "FlowConfig":
        return FlowConfig(T=T, dt=self.dt, scheme=self.scheme, N=self.N, snapshots=(), track_energy=self.track_energy)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots ``psi`` and ``W`` of shape ``(times, ..., M + 1)``."""

    grid: RadialGrid
    times: np.ndarray
    psi: np.ndarray
    W: np.ndarray
    scheme: str
    dt: float
    energy_times: Optional[np.ndarray] = None
    energies: Optional[np.ndarray] = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def batched(self) -> bool:
        return self.psi.ndim > 2

    def state(self, index: int = -1) -> PhaseState:
        if self.batched:
            raise ValueError("batched trajectory; index psi and W directly")
        return PhaseState(
            psi=Field(self.grid, self.psi[index]),
            W=Field(self.grid, self.W[index]),
            time=float(self.times[index]),
        )

    @property
    def final(self) -> PhaseState:
        return self.state(-1)

    def energy_drift(self) -> float:
        """Largest relative excursion of the staggered energy from its first value."""

        if self.energies is None or self.energies.shape[0] == 0:
            raise ValueError("trajectory was run without energy tracking")
        reference = self.energies[0]
        scale = np.maximum(np.abs(reference), np.finfo(float).tiny)
        return float(np.max(np.abs(self.energies - reference) / scale))

    def manifest(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "scheme": self.scheme,
            "dt": self.dt,
            "grid": {"R": self.grid.R, "M": self.grid.M},
            "times": self.times.tolist(),
            **self.meta,
        }
        if self.energies is not None and not self.batched:
            payload["energy_times"] = self.energy_times.tolist()
            payload["energies"] = self.energies.tolist()
            payload["energy_drift"] = self.energy_drift()
        return payload

    def write(self, directory: Path, stem: str = "trajectory", **header: Any) -> tuple[Path, Path]:
        directory = Path(directory)
        frames = np.stack([self.psi, self.W], axis=1)
        binary = write_ensemble_binary(
            directory / f"{stem}.bin",
            frames,
            {"kind": "trajectory", "times": self.times.tolist(), "layout": "time, (psi, W), ..., node", **header},
        )
        manifest = write_json(directory / f"{stem}.json", {**self.manifest(), **header})
        return binary, manifest


def nonlinearity_values(u: np.ndarray, Q: np.ndarray, coupling: int, r: np.ndarray) -> np.ndarray:
    """``k(k+1)/(2r) (sin(2(Q + u/r)) - sin 2Q)`` written as ``k(k+1)/r cos(2Q + u/r) sin(u/r)``."""

    x = np.asarray(u, dtype=float) / r
    return coupling / r * np.cos(2.0 * Q + x) * np.sin(x)


def nonlinearity(psi: Field, profile: SolitonProfile) -> Field:
    Q = profile.on_grid(psi.grid).values
    return psi.with_values(nonlinearity_values(psi.values, Q, profile.params.coupling, psi.grid.nodes))


@dataclass(frozen=True, eq=False)
class FlowModel:
    """Forcing plus the matching potential energy split into a quadratic and a remainder part."""

    grid: RadialGrid
    kind: str
    forcing: Callable[[np.ndarray], np.ndarray]
    quadratic_weight: np.ndarray
    remainder: Optional[AnharmonicPotential] = None
    N: Optional[int] = None
    basis: Optional[SpectralBasis] = None

    def _projected(self, u: np.ndarray) -> np.ndarray:
        if self.N is None:
            return u
        return project_values(u, self.grid, self.N, self.basis)

    def potential_pair(self, first: np.ndarray, second: np.ndarray) -> np.ndarray:
        """Time-staggered potential energy ``<q a, b>/2 + (V(a) + V(b))/2``."""

        a, b = self._projected(first), self._projected(second)
        quadratic = 0.5 * self.grid.h * np.sum(self.quadratic_weight * a * b, axis=-1)
        if self.remainder is None:
            return quadratic
        return quadratic + 0.5 * (self.remainder.value(a) + self.remainder.value(b))


def build_flow_model(
    kind: FlowKind,
    profile: SolitonProfile,
    grid: RadialGrid,
    N: Optional[int] = None,
    basis: Optional[SpectralBasis] = None,
) -> FlowModel:
    Q = profile.on_grid(grid).values
    coupling = profile.params.coupling
    r = grid.nodes
    weight = coupling * np.cos(2.0 * Q) / r**2
    if kind == "linear":
        return FlowModel(grid=grid, kind=kind, forcing=lambda u: weight * u, quadratic_weight=weight)
    potential = AnharmonicPotential(grid, Q, coupling)
    if kind == "full" or N is None or (basis is None and N >= grid.M - 1):
        return FlowModel(
            grid=grid,
            kind=kind,
            forcing=lambda u: nonlinearity_values(u, Q, coupling, r),
            quadratic_weight=weight,
            remainder=potential,
        )
    if kind != "truncated":
        raise ValueError(f"unknown flow kind {kind!r}")

    def truncated(u: np.ndarray) -> np.ndarray:
        inner = project_values(u, grid, N, basis)
        return project_values(nonlinearity_values(inner, Q, coupling, r), grid, N, basis)

    return FlowModel(
        grid=grid,
        kind=kind,
        forcing=truncated,
        quadratic_weight=weight,
        remainder=potential,
        N=N,
        basis=basis,
    )


def snap_time(T: float, dt: float) -> tuple[int, float]:
    steps = int(round(T / dt))
    snapped = steps * dt
    if abs(snapped - T) > _TIME_TOLERANCE * max(1.0, T):
        logger.warning("time %.6g is not a multiple of dt=%.6g; using %.6g", T, dt, snapped)
    return steps, snapped


def _laplacian(u: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(u)
    out[..., 1:-1] = (u[..., 2:] - 2.0 * u[..., 1:-1] + u[..., :-2]) / h**2
    return out


def _staggered_energy(model: FlowModel, current: np.ndarray, following: np.ndarray, dt: float) -> np.ndarray:
    h = model.grid.h
    kinetic = 0.5 * h * np.sum(((following - current) / dt) ** 2, axis=-1)
    gradient = 0.5 * h * np.sum(np.diff(following, axis=-1) * np.diff(current, axis=-1), axis=-1) / h**2
    return kinetic + gradient + model.potential_pair(current, following)


def evolve_values(
    psi: np.ndarray,
    W: np.ndarray,
    model: FlowModel,
    cfg: FlowConfig,
) -> Trajectory:
    """Batched integration; ``psi`` and ``W`` carry the nodes on their last axis."""

    grid = model.grid
    dt = cfg.step(grid)
    steps, T = snap_time(cfg.T, dt)
    marks = {0: 0.0, steps: T}
    for requested in cfg.snapshots:
        if requested > T + _TIME_TOLERANCE:
            continue
        index, snapped = snap_time(requested, dt)
        marks[index] = snapped

    initial = np.array(psi, dtype=float)
    initial[..., [0, -1]] = 0.0
    W0 = np.array(W, dtype=float)
    frames_psi = {0: initial}
    frames_W = {0: W0}
    energy_times: list[float] = []
    energies: list[np.ndarray] = []

    if steps > 0:
        F0 = model.forcing(initial)
        if cfg.scheme == "cfl1":
            current = dalembert_values(initial, W0, grid, dt) + duhamel_values(np.stack([-F0, -F0]), grid, dt)
        else:
            velocity = np.gradient(W0, grid.h, axis=-1, edge_order=2)
            current = initial + dt * velocity + 0.5 * dt**2 * (_laplacian(initial, grid.h) - F0)
        current[..., [0, -1]] = 0.0
        previous = initial
        if cfg.track_energy:
            energy_times.append(0.5 * dt)
            energies.append(_staggered_energy(model, previous, current, dt))

        courant2 = (dt / grid.h) ** 2
        for m in range(1, steps + 1):
            forcing = model.forcing(current)
            following = np.zeros_like(current)
            if cfg.scheme == "cfl1":
                following[..., 1:-1] = (
                    current[..., 2:] + current[..., :-2] - previous[..., 1:-1] - dt**2 * forcing[..., 1:-1]
                )
            else:
                following[..., 1:-1] = (
                    2.0 * current[..., 1:-1]
                    - previous[..., 1:-1]
                    + courant2 * (current[..., 2:] - 2.0 * current[..., 1:-1] + current[..., :-2])
                    - dt**2 * forcing[..., 1:-1]
                )
            if not np.all(np.isfinite(following)):
                raise FloatingPointError(f"non-finite values at t={(m + 1) * dt:.6g} ({cfg.scheme}, dt={dt:.3g})")
            if m in marks:
                frames_psi[m] = current
                frames_W[m] = cumulative_trapezoid((following - previous) / (2.0 * dt), dx=grid.h, axis=-1, initial=0.0)
            if cfg.track_energy and m < steps:
                energy_times.append((m + 0.5) * dt)
                energies.append(_staggered_energy(model, current, following, dt))
            previous, current = current, following

    order = sorted(marks)
    return Trajectory(
        grid=grid,
        times=np.array([marks[m] for m in order]),
        psi=np.stack([frames_psi[m] for m in order]),
        W=np.stack([frames_W[m] for m in order]),
        scheme=cfg.scheme,
        dt=dt,
        energy_times=np.array(energy_times) if cfg.track_energy else None,
        energies=np.array(energies) if cfg.track_energy else None,
        meta={"flow": model.kind, "N": model.N, "T": T},
    )


def evolve(state: PhaseState, cfg: FlowConfig, profile: SolitonProfile) -> Trajectory:
    if cfg.N is not None:
        return evolve_truncated(state, cfg, profile)
    model = build_flow_model("full", profile, state.grid)
    return evolve_values(state.psi.values, state.W.values, model, cfg)


def evolve_truncated(
    state: PhaseState,
    cfg: FlowConfig,
    profile: SolitonProfile,
    basis: Optional[SpectralBasis] = None,
) -> Trajectory:
    if cfg.N is None:
        raise ValueError("evolve_truncated needs cfg.N")
    if cfg.N > state.grid.M - 1:
        raise ValueError(f"N={cfg.N} exceeds the {state.grid.M - 1} available modes")
    model = build_flow_model("truncated", profile, state.grid, N=cfg.N, basis=basis)
    return evolve_values(state.psi.values, state.W.values, model, cfg)


def evolve_linear(state: PhaseState, cfg: FlowConfig, profile: SolitonProfile) -> Trajectory:
    model = build_flow_model("linear", profile, state.grid)
    return evolve_values(state.psi.values, state.W.values, model, cfg)


def evolve_ensemble(
    psi: np.ndarray,
    W: np.ndarray,
    grid: RadialGrid,
    cfg: FlowConfig,
    profile: SolitonProfile,
    kind: FlowKind = "full",
) -> Trajectory:
    """Evolve a stack of samples at once (leading sample axis)."""

    N = cfg.N if kind == "truncated" else None
    model = build_flow_model(kind, profile, grid, N=N)
    return evolve_values(psi, W, model, cfg)


def reverse(state: PhaseState) -> PhaseState:
    return PhaseState(psi=state.psi, W=state.W.scaled(-1.0), time=state.time, meta=dict(state.meta))


def energy(state: PhaseState, profile: SolitonProfile, velocity: Optional[np.ndarray] = None) -> float:
    """``1/2 int (psi_t^2 + psi_r^2 + k(k+1) cos(2Q) psi^2 / r^2) + V(psi)`` for smooth states.

    ``velocity`` defaults to ``dW/dr``.
    """

    grid = state.grid
    r = grid.nodes
    psi = state.psi.values
    if velocity is None:
        velocity = np.gradient(state.W.values, grid.h, edge_order=2)
    Q = profile.on_grid(grid).values
    coupling = profile.params.coupling
    gradient = np.gradient(psi, grid.h, edge_order=2)
    quadratic = 0.5 * trapezoid(velocity**2 + gradient**2 + coupling * np.cos(2.0 * Q) * psi**2 / r**2, r)
    return float(quadratic + AnharmonicPotential(grid, Q, coupling).value(psi))


def energy_phi(phi: Field, phi_t: Field, coupling: int) -> float:
    """Energy of the angle ``phi`` on ``[1, R]``: ``1/2 int (r^2 phi_t^2 + r^2 phi_r^2 + k(k+1) sin^2 phi)``."""

    r = phi.grid.nodes
    density = r**2 * phi_t.values**2 + shifted_energy_density(phi.values, coupling, r)
    return 0.5 * float(trapezoid(density, r))


def finite_speed_check(
    state: PhaseState,
    t: float,
    K: float,
    L: float,
    profile: SolitonProfile,
    M_outer: Optional[float] = None,
) -> float:
    """Sup over ``[1, K]`` of the gap between the full flow and the flow of the data cut off at ``L``."""

    grid = state.grid
    outer = grid.R if M_outer is None else float(M_outer)
    if not (K + abs(t) + 1.0 <= L + _TIME_TOLERANCE and L <= outer + _TIME_TOLERANCE and outer <= grid.R + _TIME_TOLERANCE):
        raise ValueError(f"window violated: need K + |t| + 1 <= L <= M_outer <= R, got K={K}, t={t}, L={L}, M_outer={outer}")
    if t < 0.0:
        state = reverse(state)
    cfg = FlowConfig(T=abs(t), scheme="cfl1")

    def cut(radius: float) -> tuple[RadialGrid, np.ndarray, np.ndarray]:
        if math.isclose(radius, grid.R):
            return grid, state.psi.values, state.W.values
        sub = grid.subgrid(radius)
        psi = restrict0_values(state.psi.values, grid, radius, vanishing=True)
        return sub, psi, state.W.values[: sub.size]

    outer_grid, outer_psi, outer_W = cut(outer)
    inner_grid, inner_psi, inner_W = cut(L)
    full = evolve_values(outer_psi, outer_W, build_flow_model("full", profile, outer_grid), cfg)
    truncated = evolve_values(inner_psi, inner_W, build_flow_model("full", profile, inner_grid), cfg)
    window = grid.index_of(K) + 1
    return float(np.max(np.abs(full.psi[-1, :window] - truncated.psi[-1, :window])))


def galerkin_study(
    psi: np.ndarray,
    W: np.ndarray,
    grid: RadialGrid,
    Ns: Sequence[int],
    T: float,
    profile: SolitonProfile,
) -> dict[str, Any]:
    """``C^0`` gap between the full and the ``N``-truncated flows at time ``T`` for each ``N``."""

    cfg = FlowConfig(T=T, scheme="cfl1")
    full = evolve_values(psi, W, build_flow_model("full", profile, grid), cfg).psi[-1]
    errors: dict[str, float] = {}
    for N in sorted(Ns):
        truncated = evolve_values(psi, W, build_flow_model("truncated", profile, grid, N=N), cfg).psi[-1]
        gaps = np.max(np.abs(full - truncated), axis=-1)
        errors[str(N)] = float(np.mean(gaps))
    values = list(errors.values())
    factors = [later / earlier if earlier > 0.0 else 0.0 for earlier, later in zip(values, values[1:])]
    return {
        "T": T,
        "errors": errors,
        "factors": factors,
        "max_factor": max(factors) if factors else float("nan"),
        "monotone": all(later <= earlier for earlier, later in zip(values, values[1:])),
    }


__all__ = [
    "CFLViolationError",
    "FlowConfig",
    "FlowModel",
    "LEAPFROG_MAX_COURANT",
    "Trajectory",
    "build_flow_model",
    "energy",
    "energy_phi",
    "evolve",
    "evolve_ensemble",
    "evolve_linear",
    "evolve_truncated",
    "evolve_values",
    "finite_speed_check",
    "galerkin_study",
    "nonlinearity",
    "nonlinearity_values",
    "reverse",
    "snap_time",
]
