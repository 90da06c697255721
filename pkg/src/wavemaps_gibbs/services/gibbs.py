"""Anharmonic potential, Galerkin projection and Gibbs sampling on ``[1, R]``.

The Gibbs measure is the Gaussian ``N(0, A^{-1})`` reweighted by ``exp(-V)``,
where ``V`` integrates the cubic-and-higher Taylor remainder of
``k(k+1)/2 sin^2(Q + psi / r)`` around the soliton. The remainder is evaluated
in a cancellation-free form so that ``V(eps psi) / eps^3`` stays accurate for
small ``eps``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.fft import dst
from scipy.linalg import cho_solve_banded, cholesky_banded
from scipy.special import logsumexp

from wavemaps_gibbs.core.grid import Field, RadialGrid
from wavemaps_gibbs.core.holder import holder_norm_values
from wavemaps_gibbs.services.measures import (
    PCN_STREAM,
    RESAMPLE_STREAM,
    Ensemble,
    GaussianSampler,
    sample_gaussian,
    sample_rng,
)
from wavemaps_gibbs.services.operator import DiscreteOperator, SpectralBasis
from wavemaps_gibbs.services.soliton import SolitonProfile

logger = logging.getLogger(__name__)

ESS_FLOOR = 100.0
ACCEPTANCE_BAND = (0.1, 0.9)
GRADIENT_TOLERANCE = 1e-8
ARMIJO = 1e-4
CROSS_CHECK_SIGMAS = 3.0
CROSS_CHECK_BATCHES = 20
_SERIES_CUTOFF = 1e-2
_MIN_STEP = 1e-12
_ROUNDOFF = 8.0 * float(np.finfo(float).eps)


class EffectiveSampleSizeError(RuntimeError):
    def __init__(self, ess: float, floor: float) -> None:
        super().__init__(f"effective sample size {ess:.1f} is below the floor {floor:g}; use the pCN sampler")
        self.ess = ess
        self.floor = floor


class OptimizerStagnationError(RuntimeError):
    """Line search failed before the gradient tolerance was reached."""


def remainder_parts(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(sin(2x)/2 - x, sin(x)^2 - x^2)`` with Taylor series below ``|x| < 1e-2``."""

    x = np.asarray(x, dtype=float)
    odd = 0.5 * np.sin(2.0 * x) - x
    even = np.sin(x) ** 2 - x**2
    small = np.abs(x) < _SERIES_CUTOFF
    if np.any(small):
        xs = x[small]
        x2 = xs**2
        odd[small] = xs**3 * (-2.0 / 3.0 + x2 * (2.0 / 15.0 - x2 * 4.0 / 315.0))
        even[small] = x2**2 * (-1.0 / 3.0 + x2 * (2.0 / 45.0 - x2 / 315.0))
    return odd, even


def _sine_scale(grid: RadialGrid) -> float:
    return math.sqrt(2.0 / (grid.R - 1.0))


def sine_coefficients(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``h``-weighted inner products with ``sqrt(2/(R-1)) sin(pi m (r-1)/(R-1))``, ``m = 1..M-1``."""

    values = np.asarray(values, dtype=float)
    return grid.h * _sine_scale(grid) * 0.5 * dst(values[..., 1:-1], type=1, axis=-1)


def sine_synthesis(coefficients: np.ndarray, grid: RadialGrid) -> np.ndarray:
    coefficients = np.asarray(coefficients, dtype=float)
    out = np.zeros(coefficients.shape[:-1] + (grid.size,))
    out[..., 1:-1] = _sine_scale(grid) * 0.5 * dst(coefficients, type=1, axis=-1)
    return out


def project_values(
    values: np.ndarray,
    grid: RadialGrid,
    N: int,
    basis: Optional[SpectralBasis] = None,
) -> np.ndarray:
    """``P_N`` along the last axis; ``basis`` replaces the sine modes when given."""

    if N < 0:
        raise ValueError(f"truncation N must be non-negative, got {N}")
    values = np.asarray(values, dtype=float)
    if basis is not None:
        inner = basis.vectors[1:-1, :N]
        coefficients = grid.h * values[..., 1:-1] @ inner
        return coefficients @ basis.vectors[:, :N].T
    if N >= grid.M - 1:
        out = values.copy()
        out[..., [0, -1]] = 0.0
        return out
    coefficients = sine_coefficients(values, grid)
    coefficients[..., N:] = 0.0
    return sine_synthesis(coefficients, grid)


def project(psi: Field, N: int, basis: Optional[SpectralBasis] = None) -> Field:
    return psi.with_values(project_values(psi.values, psi.grid, N, basis))


def projection_bounds(f: Field, N: int, alpha: float = 0.45) -> dict[str, float]:
    """Observed constants in the elementary ``P_N`` estimates."""

    grid = f.grid
    projected = project_values(f.values, grid, N)
    tail = f.values - projected
    tail[[0, -1]] = 0.0
    sup = float(np.max(np.abs(f.values))) or 1.0
    holder = float(holder_norm_values(f.values, grid.nodes, alpha, 0.0)) or 1.0
    l2 = math.sqrt(grid.h * float(np.sum(projected**2)))
    tail_l2 = math.sqrt(grid.h * float(np.sum(tail**2)))
    return {
        "N": N,
        "l2_constant": l2 / (math.sqrt(grid.R) * sup),
        "sup_constant": float(np.max(np.abs(projected))) / (max(N, 1) * sup),
        "tail_constant": tail_l2 / (math.sqrt(grid.R) * (grid.R / max(N, 1)) ** alpha * holder),
    }


class AnharmonicPotential:
    """``V`` restricted to ``[1, L]`` on a fixed grid, with its node gradient."""

    def __init__(self, grid: RadialGrid, Q: np.ndarray, coupling: int, L: Optional[float] = None) -> None:
        self.grid = grid
        self.coupling = coupling
        self.L = float(grid.R if L is None else L)
        self.index = grid.index_of(self.L)
        self.r = grid.nodes
        self.sin2Q = np.sin(2.0 * Q)
        self.cos2Q = np.cos(2.0 * Q)
        weights = np.zeros(grid.size)
        weights[: self.index + 1] = grid.h
        weights[0] = weights[self.index] = 0.5 * grid.h
        self.weights = weights

    @classmethod
    def build(cls, profile: SolitonProfile, grid: RadialGrid, L: Optional[float] = None) -> "AnharmonicPotential":
        return cls(grid, profile.on_grid(grid).values, profile.params.coupling, L)

    def _integrate(self, density: np.ndarray) -> np.ndarray:
        return 0.5 * self.coupling * (density @ self.weights)

    def remainder(self, x: np.ndarray) -> np.ndarray:
        odd, even = remainder_parts(x)
        return self.sin2Q * odd + self.cos2Q * even

    def value(self, psi: np.ndarray) -> np.ndarray:
        return self._integrate(self.remainder(np.asarray(psi, dtype=float) / self.r))

    def truncated_value(self, psi: np.ndarray, projected: np.ndarray) -> np.ndarray:
        """Sine terms see ``P_N psi``; the quadratic subtraction keeps ``psi`` itself."""

        x = np.asarray(psi, dtype=float) / self.r
        xN = np.asarray(projected, dtype=float) / self.r
        return self._integrate(self.remainder(xN) + self.cos2Q * (xN**2 - x**2))

    def bridge_log_density(self, projected: np.ndarray) -> np.ndarray:
        """Log-density of the Gibbs measure against the Brownian-bridge Gaussian."""

        xN = np.asarray(projected, dtype=float) / self.r
        return -self._integrate(self.remainder(xN) + self.cos2Q * xN**2)

    def gradient(self, psi: np.ndarray) -> np.ndarray:
        """Euclidean gradient of `value` with respect to the node values."""

        x = np.asarray(psi, dtype=float) / self.r
        odd, _ = remainder_parts(x)
        derivative = -2.0 * self.sin2Q * np.sin(x) ** 2 + 2.0 * self.cos2Q * odd
        grad = 0.5 * self.coupling * self.weights * derivative / self.r
        grad[..., 0] = 0.0
        grad[..., -1] = 0.0
        return grad


def potential_V(psi: Field, L: float, profile: SolitonProfile) -> float:
    return float(AnharmonicPotential.build(profile, psi.grid, L).value(psi.values))


def potential_V_truncated(
    psi: Field,
    N: int,
    basis: Optional[SpectralBasis],
    profile: SolitonProfile,
    L: Optional[float] = None,
) -> float:
    model = AnharmonicPotential.build(profile, psi.grid, L)
    if basis is None and N >= psi.grid.M - 1:
        return float(model.value(psi.values))
    projected = project_values(psi.values, psi.grid, N, basis)
    return float(model.truncated_value(psi.values, projected))


def bridge_log_density(psi: Field, L: float, profile: SolitonProfile, N: Optional[int] = None) -> float:
    model = AnharmonicPotential.build(profile, psi.grid, L)
    projected = psi.values if N is None else project_values(psi.values, psi.grid, N)
    return float(model.bridge_log_density(projected))


def ensemble_potentials(
    ensemble: Ensemble,
    L: Optional[float],
    profile: SolitonProfile,
    N: Optional[int] = None,
    basis: Optional[SpectralBasis] = None,
) -> np.ndarray:
    model = AnharmonicPotential.build(profile, ensemble.grid, L)
    if N is None or (basis is None and N >= ensemble.grid.M - 1):
        return np.atleast_1d(model.value(ensemble.values))
    projected = project_values(ensemble.values, ensemble.grid, N, basis)
    return np.atleast_1d(model.truncated_value(ensemble.values, projected))


def effective_sample_size(logweights: np.ndarray) -> float:
    logweights = np.asarray(logweights, dtype=float)
    return float(np.exp(2.0 * logsumexp(logweights) - logsumexp(2.0 * logweights)))


def normalization_estimate(logweights: np.ndarray) -> tuple[float, float]:
    """Mean of ``exp(logweights)`` and its jackknife standard error."""

    logweights = np.asarray(logweights, dtype=float)
    count = logweights.shape[0]
    if count == 0:
        raise ValueError("cannot estimate a normalisation from zero samples")
    shift = float(np.max(logweights))
    weights = np.exp(logweights - shift)
    total = float(np.sum(weights))
    estimate = math.exp(shift) * total / count
    if count < 2:
        return estimate, float("nan")
    leave_one_out = (total - weights) / (count - 1)
    spread = (count - 1) / count * float(np.sum((leave_one_out - leave_one_out.mean()) ** 2))
    return estimate, math.exp(shift) * math.sqrt(spread)


@dataclass(frozen=True, eq=False)
class WeightedEnsemble:
    base: Ensemble
    logweights: np.ndarray
    Z: float
    Z_stderr: float
    ess: float
    ess_floor: float = ESS_FLOOR
    potentials: Optional[np.ndarray] = None
    acceptance_rate: Optional[float] = None

    def __post_init__(self) -> None:
        logweights = np.asarray(self.logweights, dtype=float)
        if logweights.shape != (self.base.count,):
            raise ValueError("one log-weight per sample is required")
        if not np.all(np.isfinite(logweights)):
            raise ValueError("log-weights must be finite")
        object.__setattr__(self, "logweights", logweights)

    @property
    def count(self) -> int:
        return self.base.count

    @property
    def below_floor(self) -> bool:
        return self.ess < self.ess_floor

    def weights(self) -> np.ndarray:
        return np.exp(self.logweights - logsumexp(self.logweights))

    def weighted_mean(self, observable: np.ndarray) -> tuple[float, float]:
        """Self-normalised mean of one value per sample with its delta-method standard error."""

        observable = np.asarray(observable, dtype=float)
        weights = self.weights()
        mean = float(weights @ observable)
        stderr = math.sqrt(float(np.sum(weights**2 * (observable - mean) ** 2)))
        return mean, stderr

    def summary(self) -> dict[str, Any]:
        return {
            "samples": self.count,
            "Z": self.Z,
            "Z_stderr": self.Z_stderr,
            "ess": self.ess,
            "ess_floor": self.ess_floor,
            "ess_below_floor": self.below_floor,
            "acceptance_rate": self.acceptance_rate,
        }


def gibbs_reweight(
    ensemble: Ensemble,
    L: Optional[float],
    profile: SolitonProfile,
    *,
    N: Optional[int] = None,
    basis: Optional[SpectralBasis] = None,
    ess_floor: float = ESS_FLOOR,
    strict: bool = False,
) -> WeightedEnsemble:
    """Importance weights ``exp(-V)`` for Gaussian samples (``V^(N)`` when ``N`` is given)."""

    if ensemble.count == 0:
        raise ValueError("cannot reweight an empty ensemble")
    potentials = ensemble_potentials(ensemble, L, profile, N, basis)
    logweights = -potentials
    Z, Z_stderr = normalization_estimate(logweights)
    ess = effective_sample_size(logweights)
    weighted = WeightedEnsemble(
        base=ensemble,
        logweights=logweights,
        Z=Z,
        Z_stderr=Z_stderr,
        ess=ess,
        ess_floor=ess_floor,
        potentials=potentials,
    )
    if weighted.below_floor:
        if strict:
            raise EffectiveSampleSizeError(ess, ess_floor)
        logger.warning("effective sample size %.1f below floor %g; consider the pCN sampler", ess, ess_floor)
    logger.info("reweighted %d samples: Z=%.4g +- %.2g, ESS=%.1f", ensemble.count, Z, Z_stderr, ess)
    return weighted


def resample(weighted: WeightedEnsemble, seed: int, count: Optional[int] = None) -> Ensemble:
    """Multinomial resampling to an equally weighted ensemble."""

    size = weighted.count if count is None else count
    rng = sample_rng(seed, RESAMPLE_STREAM, 0)
    indices = rng.choice(weighted.count, size=size, replace=True, p=weighted.weights())
    base = weighted.base
    meta = {**base.meta, "resampled_from": base.count, "ess": weighted.ess}
    return Ensemble(grid=base.grid, values=base.values[indices], seed=seed, params=base.params, kind="gibbs", meta=meta)


def _potential_callable(
    profile: SolitonProfile,
    grid: RadialGrid,
    L: Optional[float],
    N: Optional[int],
) -> Callable[[np.ndarray], float]:
    model = AnharmonicPotential.build(profile, grid, L)
    if N is None or N >= grid.M - 1:
        return lambda values: float(model.value(values))

    def truncated(values: np.ndarray) -> float:
        return float(model.truncated_value(values, project_values(values, grid, N)))

    return truncated


@dataclass(frozen=True)
class PcnConfig:
    beta: float = 0.3
    thin: int = 10
    burn_in: int = 100
    chains: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"pCN step beta must lie in (0, 1), got {self.beta}")
        if self.thin < 1 or self.burn_in < 0 or self.chains < 1:
            raise ValueError("thin and chains must be positive and burn_in non-negative")


@dataclass(eq=False)
class PcnChain:
    """One preconditioned Crank-Nicolson chain; proposals keep the Gaussian prior reversible."""

    sampler: GaussianSampler
    potential: Callable[[np.ndarray], float]
    beta: float
    seed: int
    chain_id: int = 0
    state: Optional[np.ndarray] = None
    value: float = float("nan")
    accepted: int = 0
    proposed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"pCN step beta must lie in (0, 1), got {self.beta}")
        if self.state is None:
            rng = sample_rng(self.seed, PCN_STREAM, self.chain_id, 0)
            self.state = self.sampler.draw(rng.standard_normal(self.sampler.modes))
        self.value = float(self.potential(self.state))

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")

    def step(self) -> bool:
        self.proposed += 1
        rng = sample_rng(self.seed, PCN_STREAM, self.chain_id, self.proposed)
        xi = self.sampler.draw(rng.standard_normal(self.sampler.modes))
        proposal = math.sqrt(1.0 - self.beta**2) * self.state + self.beta * xi
        candidate = float(self.potential(proposal))
        log_ratio = self.value - candidate
        if np.isfinite(log_ratio) and math.log1p(-rng.random()) <= log_ratio:
            self.state = proposal
            self.value = candidate
            self.accepted += 1
            return True
        return False


def pcn_sample(
    sampler: GaussianSampler,
    config: PcnConfig,
    L: Optional[float],
    profile: SolitonProfile,
    steps: int,
    *,
    N: Optional[int] = None,
    potential: Optional[Callable[[np.ndarray], float]] = None,
) -> WeightedEnsemble:
    """Thinned pCN output with unit weights; ``potential`` overrides ``V`` (or ``V^(N)``)."""

    if potential is None:
        potential = _potential_callable(profile, sampler.grid, L, N)

    rows: list[np.ndarray] = []
    values: list[float] = []
    accepted = proposed = 0
    for chain_id in range(config.chains):
        chain = PcnChain(sampler=sampler, potential=potential, beta=config.beta, seed=config.seed, chain_id=chain_id)
        for _ in range(config.burn_in):
            chain.step()
        for index in range(steps):
            chain.step()
            if (index + 1) % config.thin == 0:
                rows.append(chain.state.copy())
                values.append(chain.value)
        accepted += chain.accepted
        proposed += chain.proposed

    rate = accepted / proposed if proposed else float("nan")
    low, high = ACCEPTANCE_BAND
    if proposed and not low <= rate <= high:
        logger.warning("pCN acceptance rate %.3f outside [%g, %g]; retune beta=%g", rate, low, high, config.beta)
    base = Ensemble(
        grid=sampler.grid,
        values=np.array(rows).reshape(-1, sampler.grid.size),
        seed=config.seed,
        params=sampler.params,
        kind="pcn",
        meta={"beta": config.beta, "thin": config.thin, "burn_in": config.burn_in, "chains": config.chains},
    )
    count = base.count
    return WeightedEnsemble(
        base=base,
        logweights=np.zeros(count),
        Z=float("nan"),
        Z_stderr=float("nan"),
        ess=float(count),
        potentials=np.array(values),
        acceptance_rate=rate,
    )


def acceptance_out_of_band(weighted: WeightedEnsemble) -> bool:
    rate = weighted.acceptance_rate
    if rate is None or math.isnan(rate):
        return False
    return not ACCEPTANCE_BAND[0] <= rate <= ACCEPTANCE_BAND[1]


def batch_means_stderr(series: np.ndarray, batches: int = CROSS_CHECK_BATCHES) -> float:
    """Standard error of a correlated chain average from contiguous batch means."""

    series = np.asarray(series, dtype=float)
    batches = min(batches, series.shape[0])
    if batches < 2:
        return float("nan")
    means = np.array([chunk.mean() for chunk in np.array_split(series, batches)])
    return float(np.std(means, ddof=1) / math.sqrt(batches))


def cross_check_radii(grid: RadialGrid, L: Optional[float] = None) -> tuple[float, ...]:
    """Nodes at a quarter, half and three quarters of the potential window."""

    upper = grid.R if L is None else L
    return tuple(float(grid.nodes[_nearest_index(grid, 1.0 + f * (upper - 1.0))]) for f in (0.25, 0.5, 0.75))


def _nearest_index(grid: RadialGrid, r: float) -> int:
    return int(np.clip(round((r - 1.0) / grid.h), 0, grid.M))


def cross_check_observables(
    ensemble: Ensemble, potentials: np.ndarray, radii: Sequence[float]
) -> dict[str, np.ndarray]:
    observables = {"V": np.asarray(potentials, dtype=float)}
    for r in radii:
        column = ensemble.values[:, _nearest_index(ensemble.grid, r)]
        observables[f"psi@{r:g}"] = column
        observables[f"psi2@{r:g}"] = column**2
    return observables


def sampler_cross_check(
    weighted: WeightedEnsemble,
    chain: WeightedEnsemble,
    radii: Sequence[float],
    *,
    sigmas: float = CROSS_CHECK_SIGMAS,
    batches: int = CROSS_CHECK_BATCHES,
) -> dict[str, Any]:
    """Compare reweighted means with pCN chain means, observable by observable.

    ``weighted`` comes from `gibbs_reweight` and ``chain`` from `pcn_sample` on
    the same window, truncation and profile. Each observable agrees when the two
    means are within ``sigmas`` combined standard errors; the chain error uses
    batch means, the reweighted error the delta method.
    """

    if weighted.potentials is None or chain.potentials is None:
        raise ValueError("both ensembles must carry their potentials")
    reweighted = cross_check_observables(weighted.base, weighted.potentials, radii)
    chained = cross_check_observables(chain.base, chain.potentials, radii)
    rows: dict[str, dict[str, Any]] = {}
    for name, values in reweighted.items():
        mean_w, err_w = weighted.weighted_mean(values)
        series = chained[name]
        mean_c = float(np.mean(series))
        err_c = batch_means_stderr(series, batches)
        combined = math.sqrt(err_w**2 + err_c**2)
        gap = abs(mean_w - mean_c)
        rows[name] = {
            "reweight": mean_w,
            "reweight_stderr": err_w,
            "pcn": mean_c,
            "pcn_stderr": err_c,
            "standardized_gap": gap / combined if combined > 0.0 else (0.0 if gap == 0.0 else math.inf),
            "agree": bool(gap <= sigmas * combined),
        }
    agree = all(row["agree"] for row in rows.values())
    if not agree:
        failing = sorted(name for name, row in rows.items() if not row["agree"])
        logger.warning("reweighting and pCN disagree beyond %g standard errors on %s", sigmas, ", ".join(failing))
    return {
        "sigmas": sigmas,
        "batches": batches,
        "radii": [float(r) for r in radii],
        "reweight_ess": weighted.ess,
        "pcn_samples": chain.count,
        "pcn_acceptance_rate": chain.acceptance_rate,
        "observables": rows,
        "agree": agree,
    }


def exp_moment_threshold(k: int) -> float:
    return math.inf if k == 0 else 1.0 + 1.0 / (4.0 * k * (k + 1))


class ExpMoment(NamedTuple):
    estimate: float
    stderr: float


def exp_moment(
    ensemble: Ensemble,
    q: float,
    L: Optional[float],
    profile: SolitonProfile,
    *,
    potentials: Optional[np.ndarray] = None,
) -> ExpMoment:
    """Monte Carlo ``E[exp(-q V_L)]`` over a Gaussian ensemble."""

    if q < 0.0:
        raise ValueError(f"q must be non-negative, got {q}")
    if q == 0.0:
        return ExpMoment(1.0, 0.0)
    if q >= exp_moment_threshold(profile.k):
        logger.warning("q=%g is at or above the exponential-moment threshold %g", q, exp_moment_threshold(profile.k))
    if potentials is None:
        potentials = ensemble_potentials(ensemble, L, profile)
    return moment_from_potentials(potentials, q)


def moment_from_potentials(potentials: np.ndarray, q: float) -> ExpMoment:
    """Sample mean of ``exp(-q V)`` with its standard error, computed with a max shift."""

    exponent = -q * np.asarray(potentials, dtype=float)
    shift = float(np.max(exponent))
    scaled = np.exp(exponent - shift)
    count = scaled.shape[0]
    stderr = float(np.std(scaled, ddof=1)) / math.sqrt(count) if count > 1 else float("nan")
    return ExpMoment(math.exp(shift) * float(np.mean(scaled)), math.exp(shift) * stderr)


def _half_node(grid: RadialGrid, L: float) -> float:
    return 1.0 + round((0.5 * L - 1.0) / grid.h) * grid.h


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    points = [(math.log(x), math.log(y)) for x, y in zip(xs, ys) if y > 0.0]
    if len(points) < 2:
        return float("nan")
    logs = np.array(points)
    return float(np.polyfit(logs[:, 0], logs[:, 1], 1)[0])


def increment_diagnostic(
    ensemble: Ensemble,
    Ls: Sequence[float],
    Ns: Sequence[int],
    profile: SolitonProfile,
    *,
    p: float = 2.0,
    basis: Optional[SpectralBasis] = None,
    L_for_N: Optional[float] = None,
) -> dict[str, Any]:
    """``p``-norms of ``V_L - V_{L/2}`` and of ``|V - V^(N)| exp|V - V^(N)|`` with their log-log slopes."""

    grid = ensemble.grid

    def norm(values: np.ndarray) -> float:
        return float(np.mean(np.abs(values) ** p) ** (1.0 / p))

    L_increments: dict[str, float] = {}
    for L in Ls:
        if L < 2.0:
            raise ValueError(f"L-increments need L >= 2, got {L}")
        full = ensemble_potentials(ensemble, L, profile)
        half = ensemble_potentials(ensemble, _half_node(grid, L), profile)
        L_increments[f"{L:g}"] = norm(full - half)

    window = grid.R if L_for_N is None else L_for_N
    reference = ensemble_potentials(ensemble, window, profile)
    N_increments: dict[str, float] = {}
    for N in Ns:
        gap = np.abs(reference - ensemble_potentials(ensemble, window, profile, N=N, basis=basis))
        N_increments[str(N)] = norm(gap * np.exp(gap))

    return {
        "p": p,
        "L_increments": L_increments,
        "N_increments": N_increments,
        "L_slope": loglog_slope(list(Ls), list(L_increments.values())),
        "N_slope": loglog_slope(list(Ns), list(N_increments.values())),
        "N_window": window,
    }


class DriftObjective:
    """``q V(psi + zeta) + <zeta, A zeta> / 2`` over drifts with ``zeta(1) = zeta(R) = 0``."""

    def __init__(self, potential: AnharmonicPotential, op: DiscreteOperator, q: float) -> None:
        if not potential.grid.matches(op.grid):
            raise ValueError("potential and operator grids differ")
        self.potential = potential
        self.op = op
        self.q = q
        h = op.grid.h
        banded = np.zeros((2, op.dimension))
        banded[0, 1:] = h * op.off_diagonal
        banded[1, :] = h * op.diagonal
        self._factor = cholesky_banded(banded)

    def value(self, psi: np.ndarray, zeta: np.ndarray) -> float:
        return self.q * float(self.potential.value(psi + zeta)) + 0.5 * float(self.op.quadratic_form(zeta))

    def gradient(self, psi: np.ndarray, zeta: np.ndarray) -> np.ndarray:
        grad = self.q * self.potential.gradient(psi + zeta) + self.op.grid.h * self.op.apply(zeta)
        grad[0] = grad[-1] = 0.0
        return grad

    def direction(self, gradient: np.ndarray) -> np.ndarray:
        """Descent direction preconditioned by ``(h A)^{-1}``."""

        step = np.zeros_like(gradient)
        step[1:-1] = -cho_solve_banded((self._factor, False), gradient[1:-1])
        return step

    def gradient_norm(self, gradient: np.ndarray) -> float:
        return math.sqrt(float(np.sum(gradient**2)) / self.op.grid.h)


def minimize_drift(
    objective: DriftObjective,
    psi: np.ndarray,
    *,
    tol: float = GRADIENT_TOLERANCE,
    max_iter: int = 500,
) -> tuple[np.ndarray, list[float], float]:
    """Preconditioned gradient descent with Armijo backtracking; returns ``(zeta, trace, gradient norm)``."""

    zeta = np.zeros_like(psi)
    current = objective.value(psi, zeta)
    trace = [current]
    grad_norm = float("nan")
    for _ in range(max_iter):
        grad = objective.gradient(psi, zeta)
        grad_norm = objective.gradient_norm(grad)
        if grad_norm <= tol:
            return zeta, trace, grad_norm
        direction = objective.direction(grad)
        slope = float(grad @ direction)
        if -slope <= _ROUNDOFF * max(1.0, abs(current)):
            logger.debug("drift search stopped at round-off, gradient norm %.3e", grad_norm)
            return zeta, trace, grad_norm
        t = 1.0
        while True:
            candidate = zeta + t * direction
            value = objective.value(psi, candidate)
            if value <= current + ARMIJO * t * slope:
                break
            t *= 0.5
            if t < _MIN_STEP:
                raise OptimizerStagnationError(
                    f"line search failed with gradient norm {grad_norm:.3e} above tolerance {tol:g}"
                )
        zeta, current = candidate, value
        trace.append(current)
    raise OptimizerStagnationError(f"no convergence within {max_iter} iterations (gradient norm {grad_norm:.3e})")


@dataclass(frozen=True, eq=False)
class VariationalResult:
    q: float
    drifts: np.ndarray
    minima: np.ndarray
    value: float
    stderr: float
    traces: tuple[tuple[float, ...], ...]
    gradient_norms: np.ndarray

    def summary(self) -> dict[str, Any]:
        return {
            "q": self.q,
            "bound": self.value,
            "bound_stderr": self.stderr,
            "samples": int(self.minima.shape[0]),
            "max_iterations": max((len(trace) - 1 for trace in self.traces), default=0),
            "max_gradient_norm": float(np.max(self.gradient_norms)) if self.gradient_norms.size else 0.0,
        }


def variational_lower_bound(
    ensemble: Ensemble,
    q: float,
    L: Optional[float],
    profile: SolitonProfile,
    op: DiscreteOperator,
    *,
    tol: float = GRADIENT_TOLERANCE,
    max_iter: int = 500,
) -> VariationalResult:
    """Average over samples of ``min_zeta q V(psi + zeta) + <zeta, A zeta>/2``, a lower bound on ``-log E[exp(-qV)]``."""

    if q < 0.0:
        raise ValueError(f"q must be non-negative, got {q}")
    if q >= exp_moment_threshold(profile.k):
        logger.warning("q=%g outside the exponential-moment window; the bound may fail", q)
    if not ensemble.grid.matches(op.grid):
        raise ValueError("ensemble and operator grids differ")
    objective = DriftObjective(AnharmonicPotential.build(profile, ensemble.grid, L), op, q)
    drifts = np.zeros_like(ensemble.values)
    minima = np.zeros(ensemble.count)
    norms = np.zeros(ensemble.count)
    traces = []
    for index, psi in enumerate(ensemble.values):
        zeta, trace, grad_norm = minimize_drift(objective, psi, tol=tol, max_iter=max_iter)
        drifts[index] = zeta
        minima[index] = trace[-1]
        norms[index] = grad_norm
        traces.append(tuple(trace))
    count = ensemble.count
    value = float(np.mean(minima)) if count else 0.0
    stderr = float(np.std(minima, ddof=1)) / math.sqrt(count) if count > 1 else 0.0
    return VariationalResult(
        q=q,
        drifts=drifts,
        minima=minima,
        value=value,
        stderr=stderr,
        traces=tuple(traces),
        gradient_norms=norms,
    )


def gradient_check(
    objective: DriftObjective,
    psi: np.ndarray,
    *,
    points: int = 20,
    seed: int = 0,
    step: float = 1e-6,
    scale: float = 0.1,
) -> float:
    """Largest relative gap between analytic and central-difference directional derivatives."""

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        zeta = np.zeros_like(psi)
        zeta[1:-1] = scale * rng.standard_normal(psi.shape[0] - 2)
        direction = np.zeros_like(psi)
        direction[1:-1] = rng.standard_normal(psi.shape[0] - 2)
        direction /= np.linalg.norm(direction)
        analytic = float(objective.gradient(psi, zeta) @ direction)
        forward = objective.value(psi, zeta + step * direction)
        backward = objective.value(psi, zeta - step * direction)
        numeric = (forward - backward) / (2.0 * step)
        worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-300))
    return worst


def build_gibbs_report(
    sampler: GaussianSampler,
    profile: SolitonProfile,
    *,
    method: str = "reweight",
    seed: int = 42,
    count: int = 1000,
    L: Optional[float] = None,
    N: Optional[int] = None,
    q_values: Sequence[float] = (0.5, 1.0),
    steps: int = 1000,
    config: Optional[PcnConfig] = None,
    op: Optional[DiscreteOperator] = None,
    bound_samples: int = 20,
    radii: Optional[Sequence[float]] = None,
) -> tuple[dict[str, Any], Ensemble]:
    """Gibbs ensemble plus its report: ``Z``, ESS, exponential moments and, with ``op``, variational bounds.

    Both samplers always run on the same window and truncation; ``method``
    picks which one supplies the returned ensemble and the ``weights`` entry,
    and ``cross_check`` compares their observable means.
    """

    if method not in ("reweight", "pcn"):
        raise ValueError(f"unknown Gibbs sampler {method!r}")
    prior = sample_gaussian(sampler, seed, count)
    potentials = ensemble_potentials(prior, L, profile)
    reweighted = gibbs_reweight(prior, L, profile, N=N)
    chain = pcn_sample(sampler, config or PcnConfig(seed=seed), L, profile, steps, N=N)
    if method == "reweight":
        weighted = reweighted
        output = resample(reweighted, seed)
    else:
        weighted = chain
        output = chain.base
    cross_check = sampler_cross_check(reweighted, chain, radii or cross_check_radii(prior.grid, L))

    moments = {}
    for q in q_values:
        estimate = exp_moment(prior, q, L, profile, potentials=potentials)
        moments[f"{q:g}"] = {
            "estimate": estimate.estimate,
            "stderr": estimate.stderr,
            "minus_log": -math.log(estimate.estimate),
            "above_threshold": q >= exp_moment_threshold(profile.k),
        }

    bounds = {}
    if op is not None:
        subset = prior.with_values(prior.values[:bound_samples])
        for q in q_values:
            bounds[f"{q:g}"] = variational_lower_bound(subset, q, L, profile, op).summary()

    payload = {
        "method": method,
        "seed": seed,
        "count": count,
        "L": prior.grid.R if L is None else L,
        "N": N,
        "threshold": exp_moment_threshold(profile.k),
        "weights": weighted.summary(),
        "acceptance_out_of_band": acceptance_out_of_band(chain),
        "cross_check": cross_check,
        "exp_moments": moments,
        "variational_bounds": bounds,
        "potential_mean": float(np.mean(potentials)),
    }
    return payload, output


__all__ = [
    "ACCEPTANCE_BAND",
    "AnharmonicPotential",
    "CROSS_CHECK_BATCHES",
    "CROSS_CHECK_SIGMAS",
    "DriftObjective",
    "ESS_FLOOR",
    "EffectiveSampleSizeError",
    "ExpMoment",
    "OptimizerStagnationError",
    "PcnChain",
    "PcnConfig",
    "VariationalResult",
    "WeightedEnsemble",
    "acceptance_out_of_band",
    "batch_means_stderr",
    "bridge_log_density",
    "build_gibbs_report",
    "cross_check_observables",
    "cross_check_radii",
    "effective_sample_size",
    "ensemble_potentials",
    "exp_moment",
    "exp_moment_threshold",
    "gibbs_reweight",
    "gradient_check",
    "increment_diagnostic",
    "loglog_slope",
    "minimize_drift",
    "moment_from_potentials",
    "normalization_estimate",
    "pcn_sample",
    "potential_V",
    "potential_V_truncated",
    "project",
    "project_values",
    "projection_bounds",
    "remainder_parts",
    "resample",
    "sampler_cross_check",
    "sine_coefficients",
    "sine_synthesis",
    "variational_lower_bound",
]
