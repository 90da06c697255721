"""Tests for Gaussian sampling, white noise and the covariance diagnostics."""

from __future__ import annotations

import tempfile
import unittest
from pathlib import Path

import numpy as np

from wavemaps_gibbs.core.grid import ModelParams, RadialGrid
from wavemaps_gibbs.services.measures import (
    Ensemble,
    GaussianSampler,
    bridge_variance,
    covariance_stability,
    growth_and_holder_diagnostic,
    growth_statistics,
    mercer_check,
    mercer_check_streaming,
    moment_growth,
    sample_brownian_bridge,
    sample_gaussian,
    sample_rng,
    sample_white_noise,
    variance_law_check,
    white_noise_sampler,
)
from wavemaps_gibbs.services.operator import (
    GreensMatrix,
    SpectralBasis,
    assemble,
    eigendecompose,
    greens_explicit_matrix,
    greens_numeric,
)
from wavemaps_gibbs.services.soliton import compute_soliton


def _flat_sampler(k: int, R: float, M: int) -> tuple[GaussianSampler, GreensMatrix]:
    params = ModelParams(n=0, k=k, R=R, M=M)
    profile = compute_soliton(ModelParams(n=0, k=k, R=R, M=M), R_far=50.0)
    op = assemble(params, profile)
    return GaussianSampler(basis=eigendecompose(op), params=params), greens_numeric(op)


class SamplingTests(unittest.TestCase):
    def setUp(self) -> None:
        self.sampler, self.G = _flat_sampler(1, 6.0, 20)

    def test_generator_is_keyed(self) -> None:
        first = sample_rng(7, 0, 3).standard_normal(4)
        np.testing.assert_array_equal(first, sample_rng(7, 0, 3).standard_normal(4))
        self.assertFalse(np.array_equal(first, sample_rng(7, 1, 3).standard_normal(4)))
        with self.assertRaises(ValueError):
            sample_rng(-1, 0, 0)

    def test_empty_ensemble(self) -> None:
        ensemble = sample_gaussian(self.sampler, seed=1, count=0)
        self.assertEqual(ensemble.count, 0)
        self.assertEqual(ensemble.values.shape, (0, 21))

    def test_determinism_and_index_keying(self) -> None:
        full = sample_gaussian(self.sampler, seed=11, count=8)
        again = sample_gaussian(self.sampler, seed=11, count=8)
        np.testing.assert_array_equal(full.values, again.values)
        tail = sample_gaussian(self.sampler, seed=11, count=5, start=3)
        np.testing.assert_allclose(tail.values, full.values[3:], rtol=0.0, atol=1e-13)

    def test_samples_vanish_at_endpoints(self) -> None:
        ensemble = sample_gaussian(self.sampler, seed=2, count=50)
        self.assertFalse(np.any(ensemble.values[:, 0]))
        self.assertFalse(np.any(ensemble.values[:, -1]))

    def test_linearity_of_the_expansion(self) -> None:
        modes = self.sampler.modes
        self.assertFalse(np.any(self.sampler.draw(np.zeros(modes))))
        normals = np.zeros(modes)
        normals[0] = self.sampler.basis.lambdas[0]
        np.testing.assert_array_equal(self.sampler.draw(normals), self.sampler.basis.vectors[:, 0])

    def test_rejects_bad_cutoff(self) -> None:
        with self.assertRaises(ValueError):
            GaussianSampler(basis=self.sampler.basis, cutoff=0)

    def test_binary_container_keeps_provenance(self) -> None:
        ensemble = sample_gaussian(self.sampler, seed=5, count=3)
        with tempfile.TemporaryDirectory() as tmp:
            path = ensemble.write(Path(tmp) / "ensemble.bin", version="test")
            loaded = Ensemble.read(path)
        np.testing.assert_array_equal(loaded.values, ensemble.values)
        self.assertEqual(loaded.seed, 5)
        self.assertEqual(loaded.params, self.sampler.params)
        self.assertEqual(loaded.meta["version"], "test")


class CovarianceTests(unittest.TestCase):
    def test_mercer_against_discrete_greens(self) -> None:
        sampler, G = _flat_sampler(1, 7.0, 24)
        report = mercer_check(sample_gaussian(sampler, seed=3, count=10_000), G)
        self.assertLessEqual(report["max_standardized_deviation"], 5.0)
        self.assertGreater(report["diagonal_lower_constant"], 0.0)
        streamed = mercer_check_streaming(sampler, G, seed=3, count=10_000)
        self.assertAlmostEqual(streamed["max_standardized_deviation"], report["max_standardized_deviation"], places=6)

    def test_identity_basis_gives_scaled_identity(self) -> None:
        grid = RadialGrid(R=3.0, M=16)
        sampler = GaussianSampler(basis=SpectralBasis.canonical(grid))
        target = np.zeros((grid.size, grid.size))
        target[1:-1, 1:-1] = np.eye(grid.M - 1) / grid.h
        report = mercer_check(sample_gaussian(sampler, seed=9, count=10_000), GreensMatrix(grid, target))
        self.assertLessEqual(report["max_standardized_deviation"], 5.0)

    def test_refuses_small_ensembles(self) -> None:
        sampler, G = _flat_sampler(1, 6.0, 20)
        with self.assertRaises(ValueError):
            mercer_check(sample_gaussian(sampler, seed=1, count=100), G)

    def test_bridge_variance_law(self) -> None:
        grid = RadialGrid(R=5.0, M=32)
        sampler = GaussianSampler(basis=SpectralBasis.dirichlet(grid))
        ensemble = sample_gaussian(sampler, seed=21, count=20_000)
        self.assertLessEqual(variance_law_check(ensemble, bridge_variance(grid))["max_standardized_deviation"], 5.0)
        report = mercer_check(ensemble, greens_explicit_matrix(0, grid))
        self.assertLessEqual(report["max_standardized_deviation"], 5.0)

    def test_covariance_stability_reports_each_radius(self) -> None:
        ensembles = [
            sample_gaussian(GaussianSampler(basis=SpectralBasis.dirichlet(RadialGrid(R=R, M=M))), seed=4, count=500)
            for R, M in ((5.0, 16), (9.0, 32), (17.0, 64))
        ]
        report = covariance_stability(ensembles, L=3.0)
        self.assertEqual(report["reference_R"], 17.0)
        self.assertEqual(sorted(report["distances"]), ["5", "9"])
        self.assertTrue(all(value > 0.0 for value in report["distances"].values()))


class WhiteNoiseTests(unittest.TestCase):
    def test_bridge_endpoints_and_variance(self) -> None:
        ensemble = sample_white_noise(R=9.0, M=32, seed=8, count=20_000)
        self.assertEqual(ensemble.kind, "white_noise")
        self.assertFalse(np.any(ensemble.values[:, 0]))
        self.assertFalse(np.any(ensemble.values[:, -1]))
        report = variance_law_check(ensemble, bridge_variance(ensemble.grid))
        self.assertLessEqual(report["max_standardized_deviation"], 5.0)

    def test_unpinned_noise_is_brownian_motion(self) -> None:
        ensemble = sample_white_noise(R=9.0, M=32, seed=8, count=20_000, pinned=False)
        self.assertFalse(np.any(ensemble.values[:, 0]))
        self.assertTrue(np.all(ensemble.values[:, -1] != 0.0))
        report = variance_law_check(ensemble, ensemble.grid.nodes - 1.0)
        self.assertLessEqual(report["max_standardized_deviation"], 5.0)
        self.assertFalse(ensemble.meta["pinned"])

    def test_disjoint_increments_covariance(self) -> None:
        R, count = 9.0, 20_000
        ensemble = sample_white_noise(R=R, M=32, seed=12, count=count)
        nodes = ensemble.grid.nodes
        first = ensemble.values[:, 8] - ensemble.values[:, 4]
        second = ensemble.values[:, 24] - ensemble.values[:, 16]
        width_a, width_b = nodes[8] - nodes[4], nodes[24] - nodes[16]
        expected = -width_a * width_b / (R - 1.0)
        variance_a = width_a * (1.0 - width_a / (R - 1.0))
        variance_b = width_b * (1.0 - width_b / (R - 1.0))
        stderr = np.sqrt((variance_a * variance_b + expected**2) / count)
        self.assertLessEqual(abs(np.mean(first * second) - expected), 5.0 * stderr)

    def test_uses_its_own_stream(self) -> None:
        grid = RadialGrid(R=5.0, M=16)
        noise = sample_white_noise(R=5.0, M=16, seed=3, count=2)
        gaussian = sample_gaussian(white_noise_sampler(grid), seed=3, count=2)
        self.assertFalse(np.allclose(noise.values, gaussian.values))

    def test_direct_bridge_sampler(self) -> None:
        grid = RadialGrid(R=5.0, M=32)
        ensemble = sample_brownian_bridge(grid, seed=5, count=20_000)
        self.assertFalse(np.any(ensemble.values[:, [0, -1]]))
        self.assertLessEqual(variance_law_check(ensemble, bridge_variance(grid))["max_standardized_deviation"], 5.0)


class DiagnosticTests(unittest.TestCase):
    def test_zero_field_statistics(self) -> None:
        grid = RadialGrid(R=5.0, M=16)
        report = growth_and_holder_diagnostic(Ensemble(grid=grid, values=np.zeros((3, grid.size))))
        self.assertEqual(set(report["growth"].values()), {0.0})
        self.assertEqual(set(report["holder"].values()), {0.0})

    def test_spectral_and_direct_bridges_agree(self) -> None:
        grid = RadialGrid(R=9.0, M=64)
        spectral = sample_gaussian(GaussianSampler(basis=SpectralBasis.dirichlet(grid)), seed=6, count=2000)
        direct = sample_brownian_bridge(grid, seed=6, count=2000)
        first = growth_and_holder_diagnostic(spectral)
        second = growth_and_holder_diagnostic(direct)
        for name in ("growth", "holder"):
            self.assertAlmostEqual(first[name]["q50"], second[name]["q50"], delta=0.1 * second[name]["q50"])

    def test_exponents(self) -> None:
        report = growth_and_holder_diagnostic(Ensemble(grid=RadialGrid(R=3.0, M=4), values=np.zeros((1, 5))))
        self.assertAlmostEqual(report["growth_exponent"], 0.55)
        self.assertAlmostEqual(report["holder_exponent"], 0.45)
        with self.assertRaises(ValueError):
            growth_statistics(np.zeros((1, 5)), RadialGrid(R=3.0, M=4).nodes, eps=0.5)

    def test_gaussian_moments_grow_like_sqrt_p(self) -> None:
        values = np.random.default_rng(0).standard_normal(100_000)
        report = moment_growth(values)
        self.assertTrue(report["sqrt_growth"])
        self.assertAlmostEqual(report["ratios"]["4/2"], 3.0**0.25, delta=0.02)


if __name__ == "__main__":
    unittest.main()
