"""Gaussian measures ``N(0, A^{-1})``, the white-noise velocity law and their empirical diagnostics.

Samples are ``sum_m (g_m / lambda_m) e_m`` over the full discrete spectrum.
Every sample owns a Philox stream keyed by ``(seed, stream, index)``, so the
normals of sample ``i`` do not depend on how many samples are drawn or in
which batches.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Optional, Sequence

import numpy as np

from wavemaps_gibbs.core.grid import Field, ModelParams, RadialGrid
from wavemaps_gibbs.core.holder import holder_terms
from wavemaps_gibbs.core.io import read_ensemble_binary, write_ensemble_binary
from wavemaps_gibbs.services.operator import GreensMatrix, SpectralBasis, kernel_l1_distance

logger = logging.getLogger(__name__)

GAUSSIAN_STREAM = 0
WHITE_NOISE_STREAM = 1
BRIDGE_STREAM = 2
PCN_STREAM = 3
RESAMPLE_STREAM = 4

MIN_MERCER_SAMPLES = 10_000
DEFAULT_BATCH = 2048
DEFAULT_EPS = 0.05
DEFAULT_QUANTILES = (0.1, 0.5, 0.9)


def sample_rng(seed: int, stream: int, index: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for one sample of one stream."""

    if seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream, index, *keys])))


def standard_normals(seed: int, stream: int, indices: Sequence[int] | np.ndarray, size: int) -> np.ndarray:
    out = np.empty((len(indices), size))
    for row, index in enumerate(indices):
        out[row] = sample_rng(seed, stream, int(index)).standard_normal(size)
    return out


@dataclass(frozen=True, eq=False)
class GaussianSampler:
    basis: SpectralBasis
    params: Optional[ModelParams] = None
    cutoff: Optional[int] = None

    def __post_init__(self) -> None:
        if np.any(self.basis.eigenvalues <= 0.0):
            raise ValueError("Gaussian sampling needs a positive definite spectrum")
        if self.cutoff is not None and not 1 <= self.cutoff <= self.basis.size:
            raise ValueError(f"mode cutoff must lie in [1, {self.basis.size}], got {self.cutoff}")

    @property
    def grid(self) -> RadialGrid:
        return self.basis.grid

    @property
    def modes(self) -> int:
        return self.cutoff if self.cutoff is not None else self.basis.size

    def draw(self, normals: np.ndarray) -> np.ndarray:
        """Map standard normals of shape ``(..., modes)`` to node values ``(..., M + 1)``."""

        normals = np.asarray(normals, dtype=float)
        modes = self.modes
        scaled = normals[..., :modes] / self.basis.lambdas[:modes]
        return scaled @ self.basis.vectors[:, :modes].T

    def batches(
        self,
        seed: int,
        count: int,
        *,
        stream: int = GAUSSIAN_STREAM,
        start: int = 0,
        batch: int = DEFAULT_BATCH,
    ) -> Iterator[np.ndarray]:
        for first in range(start, start + count, batch):
            indices = np.arange(first, min(first + batch, start + count))
            yield self.draw(standard_normals(seed, stream, indices, self.modes))


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Samples stacked as rows of shape ``(count, M + 1)``."""

    grid: RadialGrid
    values: np.ndarray
    seed: Optional[int] = None
    params: Optional[ModelParams] = None
    kind: str = "gaussian"
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float).reshape(-1, self.grid.size)
        if not np.all(np.isfinite(values)):
            raise ValueError("ensemble samples must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def count(self) -> int:
        return int(self.values.shape[0])

    @property
    def samples(self) -> list[Field]:
        return [Field(self.grid, row) for row in self.values]

    def sample(self, index: int) -> Field:
        return Field(self.grid, self.values[index])

    def with_values(self, values: np.ndarray, kind: Optional[str] = None) -> "Ensemble":
        return Ensemble(
            grid=self.grid,
            values=values,
            seed=self.seed,
            params=self.params,
            kind=kind or self.kind,
            meta=dict(self.meta),
        )

    def header(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "params": self.params.to_dict() if self.params is not None else None,
            "grid": {"R": self.grid.R, "M": self.grid.M},
            **self.meta,
        }

    def write(self, path: Path, **extra: Any) -> Path:
        return write_ensemble_binary(path, self.values, {**self.header(), **extra})

    @classmethod
    def read(cls, path: Path) -> "Ensemble":
        header, values = read_ensemble_binary(path)
        grid = RadialGrid(R=header["grid"]["R"], M=header["grid"]["M"])
        params = ModelParams(**header["params"]) if header.get("params") else None
        reserved = {"kind", "seed", "params", "grid", "shape"}
        meta = {key: value for key, value in header.items() if key not in reserved}
        return cls(grid=grid, values=values, seed=header.get("seed"), params=params, kind=header["kind"], meta=meta)


def sample_gaussian(sampler: GaussianSampler, seed: int, count: int, *, start: int = 0) -> Ensemble:
    """``count`` samples of the Gaussian measure with covariance ``A^{-1}``."""

    if count < 0:
        raise ValueError("sample count must be non-negative")
    rows = list(sampler.batches(seed, count, start=start))
    values = np.concatenate(rows) if rows else np.zeros((0, sampler.grid.size))
    logger.debug("drew %d Gaussian samples (seed=%d, modes=%d)", count, seed, sampler.modes)
    return Ensemble(grid=sampler.grid, values=values, seed=seed, params=sampler.params, kind="gaussian")


def white_noise_sampler(grid: RadialGrid) -> GaussianSampler:
    return GaussianSampler(basis=SpectralBasis.dirichlet(grid))


def sample_white_noise(
    R: float,
    M: int,
    seed: int,
    count: int,
    *,
    start: int = 0,
    pinned: bool = True,
) -> Ensemble:
    """Velocity antiderivatives ``W`` drawn from their own stream.

    Pinned samples are Brownian bridges on ``[1, R]``, the antiderivatives of
    mean-free white noise. Unpinned samples add the constant velocity mode, so
    ``W`` is a Brownian motion started at ``r = 1`` and the velocity has identity
    covariance on ``L^2``; this is the velocity marginal the flow preserves.
    """

    grid = RadialGrid(R=R, M=M)
    sampler = white_noise_sampler(grid)
    if pinned:
        rows = list(sampler.batches(seed, count, stream=WHITE_NOISE_STREAM, start=start))
    else:
        ramp = (grid.nodes - 1.0) / math.sqrt(grid.R - 1.0)
        rows = []
        for first in range(start, start + count, DEFAULT_BATCH):
            indices = np.arange(first, min(first + DEFAULT_BATCH, start + count))
            normals = standard_normals(seed, WHITE_NOISE_STREAM, indices, sampler.modes + 1)
            rows.append(sampler.draw(normals) + normals[:, -1:] * ramp)
    values = np.concatenate(rows) if rows else np.zeros((0, grid.size))
    return Ensemble(grid=grid, values=values, seed=seed, kind="white_noise", meta={"pinned": pinned})


def sample_brownian_bridge(grid: RadialGrid, seed: int, count: int) -> Ensemble:
    """Bridges built from Brownian increments, independent of any spectral machinery."""

    increments = standard_normals(seed, BRIDGE_STREAM, np.arange(count), grid.M) * math.sqrt(grid.h)
    walk = np.concatenate([np.zeros((count, 1)), np.cumsum(increments, axis=1)], axis=1)
    fraction = (grid.nodes - 1.0) / (grid.R - 1.0)
    bridge = walk - fraction * walk[:, -1:]
    bridge[:, -1] = 0.0
    return Ensemble(grid=grid, values=bridge, seed=seed, kind="bridge")


def bridge_variance(grid: RadialGrid) -> np.ndarray:
    r = grid.nodes
    return (grid.R - r) * (r - 1.0) / (grid.R - 1.0)


class CovarianceAccumulator:
    """Running sum of outer products for mean-zero samples."""

    def __init__(self, grid: RadialGrid) -> None:
        self.grid = grid
        self.count = 0
        self._sum = np.zeros((grid.size, grid.size))

    def update(self, batch: np.ndarray) -> None:
        batch = np.asarray(batch, dtype=float)
        self._sum += batch.T @ batch
        self.count += batch.shape[0]

    def covariance(self) -> np.ndarray:
        if self.count == 0:
            raise ValueError("no samples accumulated")
        return self._sum / self.count


def _mercer_statistics(covariance: np.ndarray, count: int, G: GreensMatrix) -> dict[str, Any]:
    target = G.values
    diagonal = np.diag(target)
    variance = np.outer(diagonal, diagonal) + target**2
    inner = slice(1, -1)
    stderr = np.sqrt(variance[inner, inner] / count)
    deviation = (covariance[inner, inner] - target[inner, inner]) / stderr
    worst = np.unravel_index(int(np.argmax(np.abs(deviation))), deviation.shape)
    nodes = G.grid.nodes[inner]
    envelope = (1.0 - nodes / G.grid.R) * (nodes - 1.0)
    return {
        "samples": count,
        "max_standardized_deviation": float(np.abs(deviation[worst])),
        "worst_pair": [float(nodes[worst[0]]), float(nodes[worst[1]])],
        "mean_abs_standardized_deviation": float(np.mean(np.abs(deviation))),
        "max_relative_deviation": float(np.max(np.abs(covariance - target)) / np.max(np.abs(target))),
        "diagonal_lower_constant": float(np.min(np.diag(covariance)[inner] / envelope)),
    }


def mercer_check(ensemble: Ensemble, G: GreensMatrix, *, min_samples: int = MIN_MERCER_SAMPLES) -> dict[str, Any]:
    """Compare the empirical covariance with ``G`` entrywise in units of its Isserlis standard error."""

    if not ensemble.grid.matches(G.grid):
        raise ValueError("ensemble and Green's matrix live on different grids")
    if ensemble.count < min_samples:
        raise ValueError(f"Mercer check needs at least {min_samples} samples, got {ensemble.count}")
    accumulator = CovarianceAccumulator(ensemble.grid)
    accumulator.update(ensemble.values)
    return _mercer_statistics(accumulator.covariance(), accumulator.count, G)


def mercer_check_streaming(
    sampler: GaussianSampler,
    G: GreensMatrix,
    seed: int,
    count: int,
    *,
    min_samples: int = MIN_MERCER_SAMPLES,
) -> dict[str, Any]:
    """`mercer_check` without materialising the ensemble."""

    if count < min_samples:
        raise ValueError(f"Mercer check needs at least {min_samples} samples, got {count}")
    accumulator = CovarianceAccumulator(sampler.grid)
    for batch in sampler.batches(seed, count):
        accumulator.update(batch)
    return _mercer_statistics(accumulator.covariance(), accumulator.count, G)


def variance_law_check(ensemble: Ensemble, expected: np.ndarray) -> dict[str, float]:
    """Nodewise sample variance against ``expected`` with standard error ``sqrt(2/S)`` times the variance."""

    expected = np.asarray(expected, dtype=float)
    inner = slice(1, -1)
    variance = np.mean(ensemble.values[:, inner] ** 2, axis=0)
    stderr = expected[inner] * math.sqrt(2.0 / ensemble.count)
    deviation = (variance - expected[inner]) / stderr
    return {
        "samples": ensemble.count,
        "max_standardized_deviation": float(np.max(np.abs(deviation))),
        "max_relative_deviation": float(np.max(np.abs(variance - expected[inner]) / expected[inner])),
    }


def growth_statistics(values: np.ndarray, nodes: np.ndarray, eps: float = DEFAULT_EPS) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample ``sup |psi| / r^(1/2 + eps)`` and the ``(1/2 - eps)``-Hölder quotient weighted by ``max(r, rho)^(-eps)``."""

    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    values = np.atleast_2d(np.asarray(values, dtype=float))
    growth = np.max(np.abs(values) / nodes ** (0.5 + eps), axis=-1)
    _, quotient = holder_terms(values, nodes, alpha=0.5 - eps, kappa=-eps)
    return growth, quotient


def _quantiles(values: np.ndarray, levels: Sequence[float]) -> dict[str, float]:
    if values.size == 0:
        return {f"q{round(100 * level):02d}": 0.0 for level in levels}
    return {f"q{round(100 * level):02d}": float(np.quantile(values, level)) for level in levels}


def moment_growth(statistic: np.ndarray, ps: Sequence[int] = (2, 4, 8)) -> dict[str, Any]:
    """``p``-th moments ``E|X|^p^(1/p)`` and the ratios between consecutive ``p``.

    Sub-Gaussian growth ``~ sqrt(p)`` keeps every ratio of a doubling step at or
    below ``sqrt(2)``.
    """

    statistic = np.abs(np.asarray(statistic, dtype=float))
    moments = {int(p): float(np.mean(statistic**p) ** (1.0 / p)) if statistic.size else 0.0 for p in ps}
    ordered = sorted(moments)
    ratios = {}
    for low, high in zip(ordered, ordered[1:]):
        ratios[f"{high}/{low}"] = moments[high] / moments[low] if moments[low] > 0.0 else 0.0
    bounds = {key: math.sqrt(int(key.split("/")[0]) / int(key.split("/")[1])) for key in ratios}
    return {
        "moments": moments,
        "ratios": ratios,
        "sqrt_growth": all(ratios[key] <= bounds[key] + 1e-12 for key in ratios),
    }


def growth_and_holder_diagnostic(
    ensemble: Ensemble,
    eps: float = DEFAULT_EPS,
    quantiles: Sequence[float] = DEFAULT_QUANTILES,
) -> dict[str, Any]:
    nodes = ensemble.grid.nodes
    if ensemble.count:
        growth, quotient = growth_statistics(ensemble.values, nodes, eps)
    else:
        growth = quotient = np.zeros(0)
    return {
        "samples": ensemble.count,
        "eps": eps,
        "growth_exponent": 0.5 + eps,
        "holder_exponent": 0.5 - eps,
        "growth": _quantiles(growth, quantiles),
        "holder": _quantiles(quotient, quantiles),
        "growth_moments": moment_growth(growth),
    }


def empirical_covariance(ensemble: Ensemble) -> GreensMatrix:
    accumulator = CovarianceAccumulator(ensemble.grid)
    accumulator.update(ensemble.values)
    return GreensMatrix(grid=ensemble.grid, values=accumulator.covariance(), params=ensemble.params)


def covariance_stability(ensembles: Sequence[Ensemble], L: float) -> dict[str, Any]:
    """``L^1`` distances on ``[1, L]^2`` between each restricted empirical covariance and the largest-``R`` one."""

    if len(ensembles) < 2:
        raise ValueError("need at least two ensembles to compare")
    ordered = sorted(ensembles, key=lambda ensemble: ensemble.grid.R)
    reference = empirical_covariance(ordered[-1])
    nodes, block = reference.grid.nodes, reference.values
    index = reference.grid.index_of(L)
    scale = float(np.abs(block[: index + 1, : index + 1]).sum()) * reference.grid.h**2 or 1.0
    distances = {}
    for ensemble in ordered[:-1]:
        distance = kernel_l1_distance(empirical_covariance(ensemble), reference, L)
        distances[f"{ensemble.grid.R:g}"] = distance
    logger.debug("covariance stability on [1, %g] against R=%g: %s", L, nodes[-1], distances)
    return {
        "L": L,
        "reference_R": reference.grid.R,
        "distances": distances,
        "relative_distances": {key: value / scale for key, value in distances.items()},
    }


def build_measures_report(sampler: GaussianSampler, seed: int, count: int, eps: float = DEFAULT_EPS) -> dict[str, Any]:
    ensemble = sample_gaussian(sampler, seed, count)
    payload = growth_and_holder_diagnostic(ensemble, eps)
    payload["params"] = sampler.params.to_dict() if sampler.params is not None else None
    payload["seed"] = seed
    return payload


__all__ = [
    "BRIDGE_STREAM",
    "CovarianceAccumulator",
    "DEFAULT_BATCH",
    "DEFAULT_EPS",
    "Ensemble",
    "GAUSSIAN_STREAM",
    "GaussianSampler",
    "MIN_MERCER_SAMPLES",
    "PCN_STREAM",
    "RESAMPLE_STREAM",
    "WHITE_NOISE_STREAM",
    "bridge_variance",
    "build_measures_report",
    "covariance_stability",
    "empirical_covariance",
    "growth_and_holder_diagnostic",
    "growth_statistics",
    "mercer_check",
    "mercer_check_streaming",
    "moment_growth",
    "sample_brownian_bridge",
    "sample_gaussian",
    "sample_rng",
    "sample_white_noise",
    "standard_normals",
    "variance_law_check",
    "white_noise_sampler",
]
