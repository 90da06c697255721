"""Topological soliton profiles ``Q_{n,k}`` on the exterior domain.

The stationary equation ``-Q'' - (2/r) Q' + k(k+1) sin(2Q) / (2 r^2) = 0`` is
solved in the logarithmic variable ``x = ln r``, where it becomes the damped
pendulum ``Q_xx + Q_x = (k(k+1)/2) sin(2Q)``. The initial slope ``Q'(1)`` is
found by bisection: trajectories that overshoot ``n pi`` start too steep,
trajectories that turn back start too shallow. The far-field value is closed
with the asymptotics ``Q ~ n pi - alpha / r^{k+1}``, iterated on ``alpha``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import polars as pl
from scipy.integrate import solve_bvp, solve_ivp, trapezoid
from scipy.interpolate import CubicSpline

from wavemaps_gibbs.config import build_lab_paths
from wavemaps_gibbs.core.grid import Field, ModelParams, RadialGrid
from wavemaps_gibbs.core.io import read_ensemble_binary, write_ensemble_binary

logger = logging.getLogger(__name__)

DEFAULT_R_FAR = 200.0
MIN_R_FAR = 50.0
DEFAULT_TOLERANCE = 1e-5
MAX_EXTENDED_SPACING = 0.005

_ALPHA_PASSES = 2
_SLOPE_SCAN = np.linspace(0.0, 10.0, 101)[1:]
_MAX_BISECTIONS = 200
_RESIDUAL_STEP = 1e-3
_IVP_OPTIONS = {"method": "DOP853", "rtol": 1e-12, "atol": 1e-14}


class SolitonError(RuntimeError):
    """Raised when a soliton profile cannot be computed."""


class ShootingError(SolitonError):
    """Shooting failed to converge; ``bracket`` holds the last slope interval tried."""

    def __init__(self, message: str, bracket: tuple[float, float]) -> None:
        super().__init__(f"{message} (bracket on Q'(1): [{bracket[0]:.17g}, {bracket[1]:.17g}])")
        self.bracket = bracket


@dataclass(frozen=True, eq=False)
class SolitonProfile:
    """Soliton values on the extended grid ``[1, R_far]``."""

    params: ModelParams
    Q: Field
    Qprime: Field
    alpha: float
    residual: Field
    initial_slope: float = 0.0

    @property
    def R_far(self) -> float:
        return self.Q.grid.R

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual.values[1:-1])))

    def on_grid(self, grid: RadialGrid) -> Field:
        """Cubic interpolation of ``Q`` onto a working grid inside ``[1, R_far]``."""

        if grid.R > self.R_far * (1.0 + 1e-12):
            raise ValueError(f"grid reaches R={grid.R} beyond the profile's R_far={self.R_far}")
        if self.params.n == 0:
            return Field.zeros(grid)
        values = CubicSpline(self.Q.grid.nodes, self.Q.values)(grid.nodes)
        values[0] = 0.0
        return Field(grid, values)

    def derivative_on(self, grid: RadialGrid) -> Field:
        if self.params.n == 0:
            return Field.zeros(grid)
        return Field(grid, CubicSpline(self.Qprime.grid.nodes, self.Qprime.values)(grid.nodes))


def extended_grid(params: ModelParams, R_far: float) -> RadialGrid:
    spacing = min(params.h, MAX_EXTENDED_SPACING)
    M = int(math.ceil((R_far - 1.0) / spacing - 1e-9))
    return RadialGrid(R=float(R_far), M=M)


def _rhs(coupling: int) -> Callable[[float, np.ndarray], np.ndarray]:
    half = 0.5 * coupling

    def rhs(x: float, y: np.ndarray) -> np.ndarray:
        return np.array([y[1], -y[1] + half * np.sin(2.0 * y[0])])

    return rhs


def _shooting_events(target: float) -> list[Callable[[float, np.ndarray], float]]:
    def overshoot(x: float, y: np.ndarray) -> float:
        return y[0] - target

    def turnback(x: float, y: np.ndarray) -> float:
        return y[1]

    overshoot.terminal = True  # type: ignore[attr-defined]
    overshoot.direction = 1  # type: ignore[attr-defined]
    turnback.terminal = True  # type: ignore[attr-defined]
    turnback.direction = -1  # type: ignore[attr-defined]
    return [overshoot, turnback]


def _classify(slope: float, params: ModelParams, X: float, alpha: float) -> int:
    """+1 when the trajectory with ``Q'(1) = slope`` is too steep, -1 when too shallow."""

    target = params.n * math.pi
    solution = solve_ivp(
        _rhs(params.coupling),
        (0.0, X),
        [0.0, slope],
        events=_shooting_events(target),
        **_IVP_OPTIONS,
    )
    if solution.t_events[0].size:
        return 1
    if solution.t_events[1].size:
        return -1
    far_value = target - alpha * math.exp(-(params.k + 1) * X)
    return 1 if solution.y[0, -1] > far_value else -1


def _bracket(params: ModelParams, X: float, alpha: float, guess: Optional[float]) -> tuple[float, float]:
    if guess is not None:
        lo, hi = guess * (1.0 - 1e-3), guess * (1.0 + 1e-3)
        if _classify(lo, params, X, alpha) < 0 and _classify(hi, params, X, alpha) > 0:
            return lo, hi
    previous = 0.0
    for slope in _SLOPE_SCAN:
        if _classify(float(slope), params, X, alpha) > 0:
            return previous, float(slope)
        previous = float(slope)
    raise ShootingError("no overshooting slope found in the scan", (0.0, float(_SLOPE_SCAN[-1])))


def _bisect(params: ModelParams, X: float, alpha: float, bracket: tuple[float, float]) -> float:
    lo, hi = bracket
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return lo
        if _classify(mid, params, X, alpha) > 0:
            hi = mid
        else:
            lo = mid
    raise ShootingError("bisection did not reach machine precision", (lo, hi))


def _tail_coefficient(r: np.ndarray, Q: np.ndarray, n: int, k: int) -> float:
    window = r >= r[-1] / 4.0
    if np.count_nonzero(window) < 8:
        raise ValueError("tail window [R_far/4, R_far] holds fewer than 8 nodes")
    return float(np.mean(r[window] ** (k + 1) * (n * math.pi - Q[window])))


def stationary_residual(
    dense: Callable[[np.ndarray], np.ndarray], r: np.ndarray, coupling: int
) -> np.ndarray:
    """Residual of the stationary equation from a dense solution in ``x = ln r``.

    ``Q_xx`` is a centred difference of the dense ``Q_x`` with step at most
    ``1e-3``; the first and last nodes are reported as zero.
    """

    x = np.log(r)
    X = x[-1]
    step = np.minimum(_RESIDUAL_STEP, np.minimum(x, X - x))
    residual = np.zeros_like(r)
    interior = step > 0.0
    xi = x[interior]
    di = step[interior]
    Q, P = dense(xi)
    P_x = (dense(xi + di)[1] - dense(xi - di)[1]) / (2.0 * di)
    residual[interior] = (-(P_x + P) + 0.5 * coupling * np.sin(2.0 * Q)) / r[interior] ** 2
    residual[0] = 0.0
    residual[-1] = 0.0
    return residual


def _zero_profile(params: ModelParams, grid: RadialGrid) -> SolitonProfile:
    zero = Field.zeros(grid)
    return SolitonProfile(params=params, Q=zero, Qprime=zero, alpha=0.0, residual=zero, initial_slope=0.0)


def _profile_from_dense(
    params: ModelParams,
    grid: RadialGrid,
    dense: Callable[[np.ndarray], np.ndarray],
    slope: float,
) -> SolitonProfile:
    r = grid.nodes
    Q, P = dense(np.log(r))
    Q = np.array(Q)
    Q[0] = 0.0
    alpha = _tail_coefficient(r, Q, params.n, params.k)
    residual = stationary_residual(dense, r, params.coupling)
    return SolitonProfile(
        params=params,
        Q=Field(grid, Q),
        Qprime=Field(grid, P / r),
        alpha=alpha,
        residual=Field(grid, residual),
        initial_slope=slope,
    )


def compute_soliton(
    params: ModelParams,
    R_far: float = DEFAULT_R_FAR,
    tol: float = DEFAULT_TOLERANCE,
) -> SolitonProfile:
    """Solve for ``Q_{n,k}`` by shooting on ``Q'(1)``.

    Raises `ShootingError` when no bracket is found, bisection stalls, or the
    converged profile's residual exceeds ``tol``.
    """

    if R_far < max(params.R, MIN_R_FAR):
        raise ValueError(f"R_far must be at least max(R, {MIN_R_FAR}), got {R_far}")
    grid = extended_grid(params, R_far)
    if params.n == 0:
        return _zero_profile(params, grid)

    X = math.log(R_far)
    alpha = 0.0
    slope: Optional[float] = None
    profile: Optional[SolitonProfile] = None
    for sweep in range(_ALPHA_PASSES + 1):
        bracket = _bracket(params, X, alpha, slope)
        slope = _bisect(params, X, alpha, bracket)
        solution = solve_ivp(_rhs(params.coupling), (0.0, X), [0.0, slope], dense_output=True, **_IVP_OPTIONS)
        if not solution.success:
            raise ShootingError(f"integration failed: {solution.message}", bracket)
        profile = _profile_from_dense(params, grid, solution.sol, slope)
        logger.debug("soliton pass %d: Q'(1)=%.15f alpha %.10g -> %.10g", sweep, slope, alpha, profile.alpha)
        alpha = profile.alpha

    assert profile is not None
    if profile.max_residual > tol:
        raise ShootingError(
            f"stationary residual {profile.max_residual:.3e} exceeds tolerance {tol:.1e}",
            (slope, slope),
        )
    logger.info(
        "soliton (n=%d, k=%d) on [1, %g]: Q'(1)=%.12f alpha=%.10f", params.n, params.k, R_far, slope, profile.alpha
    )
    return profile


def relax_soliton(params: ModelParams, R_far: float = DEFAULT_R_FAR, tol: float = 1e-10) -> SolitonProfile:
    """Collocation solve of the same boundary-value problem with a Robin far-field closure.

    ``Q_x(X) = (k+1)(n pi - Q(X))`` at ``X = ln R_far`` encodes the decaying
    asymptotics. Used as an independent check on `compute_soliton`.
    """

    grid = extended_grid(params, R_far)
    if params.n == 0:
        return _zero_profile(params, grid)

    X = math.log(R_far)
    target = params.n * math.pi
    decay = params.k + 1
    half = 0.5 * params.coupling

    def fun(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.vstack((y[1], -y[1] + half * np.sin(2.0 * y[0])))

    def bc(ya: np.ndarray, yb: np.ndarray) -> np.ndarray:
        return np.array([ya[0], yb[1] - decay * (target - yb[0])])

    mesh = np.linspace(0.0, X, 800)
    guess = np.vstack((target * (1.0 - np.exp(-decay * mesh)), target * decay * np.exp(-decay * mesh)))
    result = solve_bvp(fun, bc, mesh, guess, tol=tol, max_nodes=500_000)
    if not result.success:
        raise SolitonError(f"collocation solve failed: {result.message}")
    return _profile_from_dense(params, grid, result.sol, float(result.sol(0.0)[1]))


def asymptotic_fit(profile: SolitonProfile) -> tuple[float, float]:
    """Return ``(alpha, decay_slope)`` for the tail ``n pi - alpha / r^{k+1}``.

    The slope is the log-log slope of the remainder after subtracting the fitted
    asymptotics, measured where the remainder sits above round-off; it is
    ``nan`` when the remainder is at round-off level throughout.
    """

    n, k = profile.n, profile.k
    if n < 1:
        raise ValueError("asymptotic fit needs a nontrivial profile (n >= 1)")
    r = profile.Q.grid.nodes
    Q = profile.Q.values
    alpha = _tail_coefficient(r, Q, n, k)

    upper = min(10.0 ** (8.0 / (3.0 * (k + 1))), profile.R_far)
    window = (r >= upper / 4.0) & (r <= upper)
    if np.count_nonzero(window) < 8:
        raise ValueError(f"remainder window [{upper / 4.0:.3g}, {upper:.3g}] holds fewer than 8 nodes")
    remainder = np.abs(Q - (n * math.pi - alpha * r ** (-(k + 1))))
    usable = window & (remainder > 1e3 * np.finfo(float).eps * n * math.pi)
    if np.count_nonzero(usable) < 8:
        return alpha, math.nan
    slope = np.polyfit(np.log(r[usable]), np.log(remainder[usable]), 1)[0]
    return alpha, float(slope)


def static_energy(r: np.ndarray, Q: np.ndarray, Qprime: np.ndarray, coupling: int) -> float:
    """Trapezoid value of ``1/2 int (r^2 Q'^2 + k(k+1) sin^2 Q) dr``."""

    return 0.5 * float(trapezoid(r**2 * Qprime**2 + coupling * np.sin(Q) ** 2, r))


def energy_of(profile: SolitonProfile, upTo: Optional[float] = None) -> float:
    """Static energy of the profile on ``[1, upTo]`` (defaults to ``R_far``)."""

    upper = profile.R_far if upTo is None else float(upTo)
    if upper > profile.R_far * (1.0 + 1e-12):
        raise ValueError(f"upTo={upper} exceeds R_far={profile.R_far}")
    r = profile.Q.grid.nodes
    keep = r <= upper + 1e-12
    r_part, Q_part, P_part = r[keep], profile.Q.values[keep], profile.Qprime.values[keep]
    if r_part[-1] < upper - 1e-12:
        r_part = np.append(r_part, upper)
        Q_part = np.append(Q_part, np.interp(upper, r, profile.Q.values))
        P_part = np.append(P_part, np.interp(upper, r, profile.Qprime.values))
    return static_energy(r_part, Q_part, P_part, profile.params.coupling)


def _cache_name(params: ModelParams, grid: RadialGrid) -> str:
    return f"soliton_n{params.n}_k{params.k}_Rfar{grid.R:g}_M{grid.M}.bin"


def _write_cache(path: Path, profile: SolitonProfile) -> None:
    header = {
        "kind": "soliton",
        "n": profile.n,
        "k": profile.k,
        "R_far": profile.R_far,
        "M": profile.Q.grid.M,
        "alpha": profile.alpha,
        "initial_slope": profile.initial_slope,
    }
    stacked = np.vstack([profile.Q.values, profile.Qprime.values, profile.residual.values])
    write_ensemble_binary(path, stacked, header)


def _read_cache(path: Path, params: ModelParams) -> SolitonProfile:
    header, stacked = read_ensemble_binary(path)
    if header.get("kind") != "soliton" or (header.get("n"), header.get("k")) != (params.n, params.k):
        raise ValueError(f"{path} does not hold the (n, k)=({params.n}, {params.k}) soliton")
    grid = RadialGrid(R=float(header["R_far"]), M=int(header["M"]))
    return SolitonProfile(
        params=params,
        Q=Field(grid, stacked[0]),
        Qprime=Field(grid, stacked[1]),
        alpha=float(header["alpha"]),
        residual=Field(grid, stacked[2]),
        initial_slope=float(header["initial_slope"]),
    )


def load_soliton(
    params: ModelParams,
    R_far: Optional[float] = None,
    *,
    cache_dir: Optional[Path] = None,
    force: bool = False,
) -> SolitonProfile:
    """Return the soliton for ``params``, preferring a cached profile when available."""

    R_far = float(R_far if R_far is not None else max(DEFAULT_R_FAR, params.R))
    grid = extended_grid(params, R_far)
    if params.n == 0:
        return _zero_profile(params, grid)

    cache_dir = cache_dir or build_lab_paths().cache_dir
    cache_path = cache_dir / _cache_name(params, grid)
    if force:
        cache_path.unlink(missing_ok=True)

    if cache_path.exists():
        try:
            return replace(_read_cache(cache_path, params), params=params)
        except (ValueError, KeyError, OSError) as exc:
            logger.warning("ignoring unreadable soliton cache %s: %s", cache_path, exc)

    profile = compute_soliton(params, R_far=R_far)
    try:
        _write_cache(cache_path, profile)
    except OSError as exc:
        logger.warning("could not write soliton cache %s: %s", cache_path, exc)
    return profile


def soliton_frame(profile: SolitonProfile) -> pl.DataFrame:
    """Plot-ready columns ``r, Q, Qprime, residual`` on the extended grid."""

    return pl.DataFrame(
        {
            "r": profile.Q.grid.nodes,
            "Q": profile.Q.values,
            "Qprime": profile.Qprime.values,
            "residual": profile.residual.values,
        }
    )


def build_soliton_report(profile: SolitonProfile) -> dict[str, Any]:
    """Summary payload: asymptotic coefficient, tail slope, energy and residuals."""

    if profile.n >= 1:
        alpha, slope = asymptotic_fit(profile)
    else:
        alpha, slope = 0.0, math.nan
    far_gap = abs(profile.Q.values[-1] - profile.n * math.pi)
    return {
        "n": profile.n,
        "k": profile.k,
        "R_far": profile.R_far,
        "extended_M": profile.Q.grid.M,
        "alpha": alpha,
        "decay_slope": slope,
        "expected_decay_slope": -3.0 * (profile.k + 1),
        "energy": energy_of(profile),
        "initial_slope": profile.initial_slope,
        "max_residual": profile.max_residual,
        "far_value_gap": far_gap,
        "far_value_bound": 2.0 * abs(alpha) / profile.R_far ** (profile.k + 1) if profile.n else 0.0,
    }


__all__ = [
    "DEFAULT_R_FAR",
    "MIN_R_FAR",
    "ShootingError",
    "SolitonError",
    "SolitonProfile",
    "asymptotic_fit",
    "build_soliton_report",
    "compute_soliton",
    "energy_of",
    "extended_grid",
    "load_soliton",
    "relax_soliton",
    "soliton_frame",
    "static_energy",
    "stationary_residual",
]
