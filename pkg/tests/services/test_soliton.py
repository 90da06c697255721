"""Tests for soliton profiles, their asymptotics and the on-disk cache."""

from __future__ import annotations

import math
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np

from wavemaps_gibbs.core.grid import Field, ModelParams, RadialGrid
from wavemaps_gibbs.services import soliton as soliton_module
from wavemaps_gibbs.services.soliton import (
    ShootingError,
    SolitonProfile,
    asymptotic_fit,
    build_soliton_report,
    compute_soliton,
    energy_of,
    load_soliton,
    relax_soliton,
    static_energy,
)


class TrivialProfileTests(unittest.TestCase):
    def test_degree_zero_profiles_vanish(self) -> None:
        for n, k in ((0, 0), (0, 1), (0, 3)):
            profile = compute_soliton(ModelParams(n=n, k=k, R=10.0, M=90))
            self.assertFalse(np.any(profile.Q.values))
            self.assertEqual(profile.alpha, 0.0)
            self.assertEqual(energy_of(profile), 0.0)

    def test_far_radius_must_cover_the_working_interval(self) -> None:
        with self.assertRaises(ValueError):
            compute_soliton(ModelParams(n=1, k=1, R=40.0, M=400), R_far=30.0)

    def test_exact_tail_model_is_recovered(self) -> None:
        params = ModelParams(n=1, k=1, R=10.0, M=90)
        grid = RadialGrid(R=100.0, M=19800)
        r = grid.nodes
        Q = Field(grid, math.pi - 2.5 / r**2)
        profile = SolitonProfile(
            params=params,
            Q=Q,
            Qprime=Field(grid, 5.0 / r**3),
            alpha=2.5,
            residual=Field.zeros(grid),
        )
        alpha, slope = asymptotic_fit(profile)
        self.assertAlmostEqual(alpha, 2.5, places=8)
        self.assertTrue(math.isnan(slope))

    def test_missing_bracket_reports_the_scan(self) -> None:
        with patch.object(soliton_module, "_SLOPE_SCAN", np.array([1e-3, 2e-3])):
            with self.assertRaises(ShootingError) as caught:
                compute_soliton(ModelParams(n=1, k=1, R=10.0, M=90), R_far=60.0)
        self.assertEqual(caught.exception.bracket, (0.0, 2e-3))


class DegreeOneSolitonTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.params = ModelParams(n=1, k=1, R=40.0, M=400)
        cls.profile = compute_soliton(cls.params)

    def test_shape_and_boundary_values(self) -> None:
        Q = self.profile.Q.values
        self.assertEqual(Q[0], 0.0)
        self.assertTrue(np.all(np.diff(Q) >= -1e-12))
        self.assertTrue(np.all((Q >= 0.0) & (Q <= math.pi)))
        self.assertGreater(self.profile.alpha, 0.0)
        gap = abs(Q[-1] - math.pi)
        self.assertLessEqual(gap, 2.0 * self.profile.alpha / self.profile.R_far**2)

    def test_stationary_residual_is_small(self) -> None:
        self.assertLess(self.profile.max_residual, 1e-5)

    def test_far_field_sign_condition(self) -> None:
        self.assertGreater(math.cos(2.0 * self.profile.Q.values[-1]), 0.99)
        # the potential is negative near r = 1 once Q has passed pi / 4
        Q40 = self.profile.on_grid(self.params.grid()).values
        self.assertTrue(np.any(np.cos(2.0 * Q40) < 0.0))

    def test_collocation_oracle_agrees(self) -> None:
        relaxed = relax_soliton(self.params)
        self.assertAlmostEqual(relaxed.alpha, self.profile.alpha, delta=1e-4 * self.profile.alpha)
        grid = self.params.grid()
        np.testing.assert_allclose(relaxed.on_grid(grid).values, self.profile.on_grid(grid).values, atol=1e-6)

    def test_remainder_decays_at_the_predicted_rate(self) -> None:
        alpha, slope = asymptotic_fit(self.profile)
        self.assertAlmostEqual(alpha, self.profile.alpha, places=10)
        self.assertGreaterEqual(slope, -6.7)
        self.assertLessEqual(slope, -5.3)

    def test_profile_minimises_energy(self) -> None:
        r = self.profile.Q.grid.nodes
        Q = self.profile.Q.values
        Qprime = self.profile.Qprime.values
        base = static_energy(r, Q, Qprime, 2)
        rng = np.random.default_rng(2024)
        for _ in range(10):
            center = rng.uniform(3.0, 8.0)
            width = rng.uniform(0.5, 1.5)
            z = (r - center) / width
            inside = np.abs(z) < 1.0
            bump = np.where(inside, np.cos(0.5 * np.pi * z) ** 2, 0.0)
            bump_prime = np.where(inside, -np.pi * np.sin(np.pi * z) / (2.0 * width), 0.0)
            for eps in (1e-2, -1e-2, 1e-3, -1e-3):
                perturbed = static_energy(r, Q + eps * bump, Qprime + eps * bump_prime, 2)
                self.assertGreater(perturbed, base)

    def test_energy_quadrature_converges_at_second_order(self) -> None:
        r = self.profile.Q.grid.nodes
        Q = self.profile.Q.values
        Qprime = self.profile.Qprime.values
        stop = int(np.searchsorted(r, 41.0))
        stop -= stop % 4
        energies = [
            static_energy(r[: stop + 1 : step], Q[: stop + 1 : step], Qprime[: stop + 1 : step], 2)
            for step in (4, 2, 1)
        ]
        self.assertGreater(energies[2], 0.0)
        ratio = (energies[0] - energies[1]) / (energies[1] - energies[2])
        self.assertGreater(ratio, 3.0)
        self.assertLess(ratio, 5.0)

    def test_report_payload(self) -> None:
        report = build_soliton_report(self.profile)
        self.assertEqual(report["expected_decay_slope"], -6.0)
        self.assertLessEqual(report["far_value_gap"], report["far_value_bound"])
        self.assertGreater(report["energy"], 0.0)


class EquivarianceTwoSolitonTests(unittest.TestCase):
    def test_decay_slope_near_minus_nine(self) -> None:
        profile = compute_soliton(ModelParams(n=1, k=2, R=40.0, M=400))
        _, slope = asymptotic_fit(profile)
        self.assertGreaterEqual(slope, -10.0)
        self.assertLessEqual(slope, -8.0)


class SolitonCacheTests(unittest.TestCase):
    def test_second_load_reads_the_cache(self) -> None:
        params = ModelParams(n=1, k=1, R=20.0, M=400)
        with tempfile.TemporaryDirectory() as tmpdir:
            cache_dir = Path(tmpdir)
            first = load_soliton(params, R_far=60.0, cache_dir=cache_dir)
            self.assertEqual(len(list(cache_dir.glob("soliton_*.bin"))), 1)
            with patch.object(soliton_module, "compute_soliton", side_effect=AssertionError("recomputed")):
                second = load_soliton(params.with_resolution(800), R_far=60.0, cache_dir=cache_dir)
        self.assertEqual(second.alpha, first.alpha)
        self.assertEqual(second.params.M, 800)
        np.testing.assert_array_equal(second.Q.values, first.Q.values)


if __name__ == "__main__":
    unittest.main()
