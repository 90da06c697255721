"""Distributional invariance of Gibbs ensembles under the flow, and the resolution probe."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import ks_2samp, kstwobign

from wavemaps_gibbs.core.extension import interpolate_rows
from wavemaps_gibbs.core.grid import ModelParams, RadialGrid
from wavemaps_gibbs.core.holder import holder_norm_values
from wavemaps_gibbs.services.dynamics import FlowConfig, FlowKind, build_flow_model, evolve_ensemble, evolve_values
from wavemaps_gibbs.services.gibbs import (
    ESS_FLOOR,
    AnharmonicPotential,
    WeightedEnsemble,
    gibbs_reweight,
    project_values,
    resample,
    sine_coefficients,
)
from wavemaps_gibbs.services.measures import DEFAULT_BATCH, GaussianSampler, sample_gaussian, sample_white_noise
from wavemaps_gibbs.services.operator import assemble, eigendecompose
from wavemaps_gibbs.services.soliton import SolitonProfile, load_soliton

logger = logging.getLogger(__name__)

DEFAULT_LEVEL = 0.01
DEFAULT_MODES = 8
DEFAULT_PAIRINGS = 3
PROBE_WINDOW = 2.0
PROBE_ALPHA = 0.45
PROBE_KAPPA = -0.55
PROBE_BAND = 2.0


@dataclass(frozen=True)
class ObservableSet:
    """Point values, smoothed velocity pairings, the potential and low sine coefficients."""

    radii: tuple[float, ...]
    pairings: int = DEFAULT_PAIRINGS
    modes: int = DEFAULT_MODES
    potential: bool = True

    @classmethod
    def default(cls, grid: RadialGrid) -> "ObservableSet":
        indices = (grid.M // 8, grid.M // 4, grid.M // 2)
        return cls(radii=tuple(float(grid.nodes[i]) for i in indices))

    def names(self) -> list[str]:
        names = [f"psi(r={r:.4g})" for r in self.radii]
        names += [f"velocity_pairing_{j}" for j in range(1, self.pairings + 1)]
        if self.potential:
            names.append("V")
        names += [f"coefficient_{m}" for m in range(1, self.modes + 1)]
        return names

    def evaluate(
        self,
        psi: np.ndarray,
        W: np.ndarray,
        grid: RadialGrid,
        potential: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ) -> dict[str, np.ndarray]:
        """One value per sample and observable; ``psi`` and ``W`` are ``(count, M + 1)``."""

        psi = np.atleast_2d(psi)
        W = np.atleast_2d(W)
        r = grid.nodes
        points = interpolate_rows(psi, grid, np.asarray(self.radii))
        values: dict[str, np.ndarray] = {}
        for column, radius in enumerate(self.radii):
            values[f"psi(r={radius:.4g})"] = points[:, column]
        for j in range(1, self.pairings + 1):
            # <dW/dr, phi_j> = -<W, phi_j'> because phi_j vanishes at both walls
            frequency = j * math.pi / (grid.R - 1.0)
            slope = frequency * np.cos(frequency * (r - 1.0))
            values[f"velocity_pairing_{j}"] = -trapezoid(W * slope, r, axis=-1)
        if self.potential:
            if potential is None:
                raise ValueError("potential observable requested without a potential")
            values["V"] = np.atleast_1d(potential(psi))
        coefficients = sine_coefficients(psi, grid)
        for m in range(1, self.modes + 1):
            values[f"coefficient_{m}"] = coefficients[:, m - 1]
        return values


@dataclass(frozen=True)
class ObservableStatistics:
    name: str
    ks: float
    p_value: float
    mean_z: float
    second_moment_z: float

    def to_dict(self) -> dict[str, float]:
        return {
            "ks": self.ks,
            "p_value": self.p_value,
            "mean_z": self.mean_z,
            "second_moment_z": self.second_moment_z,
        }


@dataclass(frozen=True, eq=False)
class InvarianceReport:
    flow: str
    T: float
    N: Optional[int]
    count: int
    seed: int
    ess: float
    statistics: tuple[ObservableStatistics, ...]
    params: ModelParams
    level: float = DEFAULT_LEVEL
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def threshold(self) -> float:
        """Bonferroni-corrected per-observable level."""

        return self.level / max(1, len(self.statistics))

    @property
    def failures(self) -> list[str]:
        return [stat.name for stat in self.statistics if stat.p_value < self.threshold]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict[str, Any]:
        return {
            "flow": self.flow,
            "T": self.T,
            "N": self.N,
            "count": self.count,
            "seed": self.seed,
            "ess": self.ess,
            "params": self.params.to_dict(),
            "level": self.level,
            "threshold": self.threshold,
            "passed": self.passed,
            "failures": self.failures,
            "max_ks": max((stat.ks for stat in self.statistics), default=0.0),
            "min_p_value": min((stat.p_value for stat in self.statistics), default=1.0),
            "observables": {stat.name: stat.to_dict() for stat in self.statistics},
            **self.meta,
        }


def _weighted_cdf(values: np.ndarray, weights: np.ndarray, points: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    cumulative = np.cumsum(weights[order])
    index = np.searchsorted(values[order], points, side="right")
    return np.where(index > 0, cumulative[np.maximum(index - 1, 0)], 0.0)


def _weighted_moment_z(before: np.ndarray, after: np.ndarray, weights: np.ndarray) -> float:
    def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
        mean = float(weights @ values)
        return mean, math.sqrt(float(np.sum(weights**2 * (values - mean) ** 2)))

    first, first_se = mean_and_stderr(before)
    second, second_se = mean_and_stderr(after)
    scale = math.hypot(first_se, second_se)
    return (first - second) / scale if scale > 0.0 else 0.0


def compare_samples(
    name: str,
    before: np.ndarray,
    after: np.ndarray,
    weights: Optional[np.ndarray] = None,
) -> ObservableStatistics:
    """Two-sample KS distance and moment z-scores for one observable.

    Without weights this is scipy's two-sample KS test. With self-normalised
    importance weights the distance is taken between weighted empirical CDFs and
    the p-value uses the asymptotic Kolmogorov law at ``ESS / 2``.
    """

    before = np.asarray(before, dtype=float)
    after = np.asarray(after, dtype=float)
    if before.shape != after.shape or before.ndim != 1 or before.size < 2:
        raise ValueError("observable samples must be matching 1-d arrays with at least two entries")
    if weights is None:
        result = ks_2samp(before, after)
        distance, p_value = float(result.statistic), float(result.pvalue)
        weights = np.full(before.size, 1.0 / before.size)
    else:
        weights = np.asarray(weights, dtype=float)
        weights = weights / np.sum(weights)
        points = np.concatenate([before, after])
        distance = float(np.max(np.abs(_weighted_cdf(before, weights, points) - _weighted_cdf(after, weights, points))))
        ess = 1.0 / float(np.sum(weights**2))
        p_value = float(min(1.0, kstwobign.sf(distance * math.sqrt(0.5 * ess))))
    return ObservableStatistics(
        name=name,
        ks=distance,
        p_value=min(max(p_value, 0.0), 1.0),
        mean_z=_weighted_moment_z(before, after, weights),
        second_moment_z=_weighted_moment_z(before**2, after**2, weights),
    )


def _evolve_in_batches(
    psi: np.ndarray,
    W: np.ndarray,
    grid: RadialGrid,
    cfg: FlowConfig,
    profile: SolitonProfile,
    kind: FlowKind,
) -> tuple[np.ndarray, np.ndarray]:
    final_psi = np.empty_like(psi)
    final_W = np.empty_like(W)
    for first in range(0, psi.shape[0], DEFAULT_BATCH):
        rows = slice(first, first + DEFAULT_BATCH)
        trajectory = evolve_ensemble(psi[rows], W[rows], grid, cfg, profile, kind=kind)
        final_psi[rows] = trajectory.psi[-1]
        final_W[rows] = trajectory.W[-1]
    return final_psi, final_W


def gibbs_phase_ensemble(
    params: ModelParams,
    profile: SolitonProfile,
    count: int,
    seed: int,
    *,
    N: Optional[int] = None,
    ess_floor: float = ESS_FLOOR,
) -> tuple[WeightedEnsemble, np.ndarray]:
    """Importance-weighted Gibbs positions (``V^(N)`` when ``N`` is given) with white-noise velocities."""

    sampler = GaussianSampler(basis=eigendecompose(assemble(params, profile)), params=params)
    prior = sample_gaussian(sampler, seed, count)
    weighted = gibbs_reweight(prior, None, profile, N=N, ess_floor=ess_floor, strict=True)
    velocities = sample_white_noise(params.R, params.M, seed, count, pinned=False)
    return weighted, velocities.values


def _invariance_test(
    params: ModelParams,
    T: float,
    count: int,
    seed: int,
    *,
    N: Optional[int],
    profile: Optional[SolitonProfile],
    level: float,
    observables: Optional[ObservableSet],
    ess_floor: float,
) -> InvarianceReport:
    profile = profile or load_soliton(params)
    grid = params.grid()
    observables = observables or ObservableSet.default(grid)
    weighted, W = gibbs_phase_ensemble(params, profile, count, seed, N=N, ess_floor=ess_floor)
    psi = np.array(weighted.base.values)

    kind: FlowKind = "full" if N is None else "truncated"
    cfg = FlowConfig(T=T, scheme="cfl1", N=N)
    final_psi, final_W = _evolve_in_batches(psi, W, grid, cfg, profile, kind)

    model = AnharmonicPotential.build(profile, grid)
    if N is None:
        potential = model.value
    else:
        def potential(values: np.ndarray) -> np.ndarray:
            return model.truncated_value(values, project_values(values, grid, N))

    before = observables.evaluate(psi, W, grid, potential)
    after = observables.evaluate(final_psi, final_W, grid, potential)
    weights = weighted.weights()
    statistics = tuple(compare_samples(name, before[name], after[name], weights) for name in observables.names())
    report = InvarianceReport(
        flow=kind,
        T=T,
        N=N,
        count=count,
        seed=seed,
        ess=weighted.ess,
        statistics=statistics,
        params=params,
        level=level,
        meta={"Z": weighted.Z, "Z_stderr": weighted.Z_stderr},
    )
    if report.passed:
        logger.info("%s invariance at T=%g passed on %d observables (ESS=%.0f)", kind, T, len(statistics), weighted.ess)
    else:
        logger.warning("%s invariance at T=%g failed on %s", kind, T, ", ".join(report.failures))
    return report


def invariance_test_truncated(
    params: ModelParams,
    N: int,
    T: float,
    count: int,
    seed: int,
    *,
    profile: Optional[SolitonProfile] = None,
    level: float = DEFAULT_LEVEL,
    observables: Optional[ObservableSet] = None,
    ess_floor: float = ESS_FLOOR,
) -> InvarianceReport:
    if not 1 <= N <= params.M // 8:
        raise ValueError(f"truncation N={N} must lie in [1, M/8] = [1, {params.M // 8}]")
    return _invariance_test(
        params, T, count, seed, N=N, profile=profile, level=level, observables=observables, ess_floor=ess_floor
    )


def invariance_test_full(
    params: ModelParams,
    T: float,
    count: int,
    seed: int,
    *,
    profile: Optional[SolitonProfile] = None,
    level: float = DEFAULT_LEVEL,
    observables: Optional[ObservableSet] = None,
    ess_floor: float = ESS_FLOOR,
) -> InvarianceReport:
    return _invariance_test(
        params, T, count, seed, N=None, profile=profile, level=level, observables=observables, ess_floor=ess_floor
    )


def windowed_norms(
    psi: np.ndarray,
    W: np.ndarray,
    grid: RadialGrid,
    window: float = PROBE_WINDOW,
    alpha: float = PROBE_ALPHA,
    kappa: float = PROBE_KAPPA,
) -> np.ndarray:
    """Weighted Hölder norm of ``psi`` plus that of the ``W`` increment, both on ``[1, window]``."""

    stop = int(np.searchsorted(grid.nodes, window * (1.0 + 1e-12), side="right"))
    if stop < 2:
        raise ValueError(f"window [1, {window}] holds fewer than two grid nodes")
    nodes = grid.nodes[:stop]
    psi = np.asarray(psi, dtype=float)[..., :stop]
    W = np.asarray(W, dtype=float)[..., :stop]
    increment = W - W[..., :1]
    return holder_norm_values(psi, nodes, alpha, kappa) + holder_norm_values(increment, nodes, alpha, kappa)


def smooth_window_data(grid: RadialGrid, amplitude: float = 0.5, window: float = PROBE_WINDOW) -> np.ndarray:
    """``amplitude * sin^2`` bump supported on ``[1, window]``."""

    r = grid.nodes
    inside = r <= window
    values = np.where(inside, amplitude * np.sin(math.pi * (r - 1.0) / (window - 1.0)) ** 2, 0.0)
    values[-1] = 0.0
    return values


def _nonincreasing(values: Sequence[float]) -> bool:
    return all(later <= earlier for earlier, later in zip(values, values[1:]))


def resolution_probe(
    params: ModelParams,
    horizons: Sequence[float],
    count: int,
    seed: int,
    *,
    profile: Optional[SolitonProfile] = None,
    window: float = PROBE_WINDOW,
    band: float = PROBE_BAND,
    smooth_amplitude: float = 0.5,
    ess_floor: float = ESS_FLOOR,
) -> dict[str, Any]:
    """Windowed norms on ``[1, window]`` for a Gibbs ensemble and for smooth data over time.

    The Gibbs median should stay inside a factor-``band`` band of its initial
    value; the smooth-data norm should decay once the bump has left the window.
    """

    horizons = sorted(float(t) for t in horizons)
    if not horizons or horizons[0] <= 0.0:
        raise ValueError("horizon times must be positive")
    if horizons[-1] + window + 1.0 > params.R:
        raise ValueError(
            f"horizon {horizons[-1]} exceeds the R-window: need t + {window} + 1 <= R = {params.R}"
        )
    profile = profile or load_soliton(params)
    grid = params.grid()
    cfg = FlowConfig(T=horizons[-1], scheme="cfl1", snapshots=tuple(horizons))

    weighted, W = gibbs_phase_ensemble(params, profile, count, seed, ess_floor=ess_floor)
    gibbs = resample(weighted, seed)
    # velocities are white noise independent of the position weights, so any W rows pair with resampled positions
    norms: list[np.ndarray] = []
    for first in range(0, count, DEFAULT_BATCH):
        rows = slice(first, first + DEFAULT_BATCH)
        trajectory = evolve_ensemble(np.array(gibbs.values[rows]), W[rows], grid, cfg, profile)
        norms.append(windowed_norms(trajectory.psi, trajectory.W, grid, window))
    gibbs_medians = np.median(np.concatenate(norms, axis=1), axis=1)
    times = [0.0, *horizons]
    ratios = [float(m / gibbs_medians[0]) if gibbs_medians[0] > 0.0 else float("nan") for m in gibbs_medians]

    smooth = smooth_window_data(grid, smooth_amplitude, window)
    deterministic = evolve_values(smooth, np.zeros(grid.size), build_flow_model("full", profile, grid), cfg)
    smooth_norms = windowed_norms(deterministic.psi, deterministic.W, grid, window)

    payload = {
        "params": params.to_dict(),
        "seed": seed,
        "count": count,
        "window": window,
        "alpha": PROBE_ALPHA,
        "kappa": PROBE_KAPPA,
        "times": times,
        "gibbs": {
            "medians": [float(m) for m in gibbs_medians],
            "ratios": ratios,
            "band": band,
            "within_band": bool(all(1.0 / band <= ratio <= band for ratio in ratios)),
            "ess": weighted.ess,
        },
        "smooth": {
            "amplitude": smooth_amplitude,
            "crossing_time": 2.0 * (window - 1.0),
            "norms": [float(value) for value in smooth_norms],
            "decays": bool(_nonincreasing([float(value) for value in smooth_norms[1:]])) and bool(smooth_norms[-1] < smooth_norms[0]),
        },
    }
    logger.info("resolution probe: Gibbs ratios %s, smooth norms %s", ratios, payload["smooth"]["norms"])
    return payload


__all__ = [
    "DEFAULT_LEVEL",
    "InvarianceReport",
    "ObservableSet",
    "ObservableStatistics",
    "compare_samples",
    "gibbs_phase_ensemble",
    "invariance_test_full",
    "invariance_test_truncated",
    "resolution_probe",
    "smooth_window_data",
    "windowed_norms",
]
