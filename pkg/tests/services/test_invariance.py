"""Tests for observables, the two-sample comparisons, invariance tests and the resolution probe."""

from __future__ import annotations

import unittest

import numpy as np
from scipy.integrate import trapezoid

from wavemaps_gibbs.core.grid import ModelParams
from wavemaps_gibbs.services.invariance import (
    ObservableSet,
    compare_samples,
    gibbs_phase_ensemble,
    invariance_test_full,
    invariance_test_truncated,
    resolution_probe,
    smooth_window_data,
    windowed_norms,
)
from wavemaps_gibbs.services.measures import sample_white_noise
from wavemaps_gibbs.services.soliton import compute_soliton

PARAMS = ModelParams(n=1, k=1, R=9.0, M=96)


class CompareSamplesTests(unittest.TestCase):
    def setUp(self) -> None:
        self.values = np.random.default_rng(4).standard_normal(500)

    def test_identical_samples(self) -> None:
        for weights in (None, np.full(500, 2.0)):
            stats = compare_samples("x", self.values, self.values, weights)
            self.assertEqual(stats.ks, 0.0)
            self.assertEqual(stats.p_value, 1.0)
            self.assertEqual(stats.mean_z, 0.0)

    def test_shift_is_detected(self) -> None:
        shifted = self.values + 1.0
        self.assertLess(compare_samples("x", self.values, shifted).p_value, 1e-6)
        weighted = compare_samples("x", self.values, shifted, np.ones(500))
        self.assertLess(weighted.p_value, 1e-6)
        self.assertGreater(abs(weighted.mean_z), 5.0)

    def test_rejects_mismatched_samples(self) -> None:
        with self.assertRaises(ValueError):
            compare_samples("x", self.values, self.values[:10])


class ObservableTests(unittest.TestCase):
    def setUp(self) -> None:
        self.grid = ModelParams(n=0, k=0, R=9.0, M=200).grid()

    def test_default_names(self) -> None:
        observables = ObservableSet.default(self.grid)
        names = observables.names()
        self.assertEqual(len(names), 3 + 3 + 1 + 8)
        self.assertIn("V", names)

    def test_velocity_pairing_matches_direct_integral(self) -> None:
        r = self.grid.nodes
        W = (r - 1.0) ** 2
        observables = ObservableSet(radii=(3.0,), potential=False)
        values = observables.evaluate(np.zeros_like(r), W, self.grid)
        for j in range(1, 4):
            direct = trapezoid(2.0 * (r - 1.0) * np.sin(j * np.pi * (r - 1.0) / 8.0), r)
            self.assertAlmostEqual(float(values[f"velocity_pairing_{j}"][0]), direct, delta=1e-3 * abs(direct))

    def test_point_values_and_coefficients(self) -> None:
        r = self.grid.nodes
        psi = np.sqrt(2.0 / 8.0) * np.sin(2.0 * np.pi * (r - 1.0) / 8.0)
        observables = ObservableSet(radii=(3.0,), potential=False)
        values = observables.evaluate(psi, np.zeros_like(r), self.grid)
        self.assertAlmostEqual(float(values["psi(r=3)"][0]), 0.5, places=10)
        self.assertAlmostEqual(float(values["coefficient_2"][0]), 1.0, places=10)
        self.assertAlmostEqual(float(values["coefficient_1"][0]), 0.0, places=10)

    def test_potential_needs_a_callable(self) -> None:
        with self.assertRaises(ValueError):
            ObservableSet.default(self.grid).evaluate(np.zeros(self.grid.size), np.zeros(self.grid.size), self.grid)


class InvarianceTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.profile = compute_soliton(PARAMS, R_far=50.0)

    def test_zero_time_gives_identical_ensembles(self) -> None:
        report = invariance_test_full(PARAMS, 0.0, 300, 5, profile=self.profile)
        self.assertTrue(report.passed)
        self.assertEqual(report.to_dict()["max_ks"], 0.0)

    def test_truncated_flow_preserves_truncated_gibbs_measure(self) -> None:
        report = invariance_test_truncated(PARAMS, 4, 2.0, 2000, 11, profile=self.profile)
        payload = report.to_dict()
        self.assertTrue(report.passed, payload["failures"])
        self.assertEqual(payload["N"], 4)
        self.assertAlmostEqual(payload["threshold"], 0.01 / 15)
        for stats in payload["observables"].values():
            self.assertGreaterEqual(stats["p_value"], 0.0)
            self.assertLessEqual(stats["p_value"], 1.0)

    def test_full_flow_preserves_gibbs_measure(self) -> None:
        report = invariance_test_full(PARAMS, 2.0, 2000, 12, profile=self.profile)
        self.assertTrue(report.passed, report.failures)
        self.assertEqual(report.flow, "full")

    def test_truncation_must_be_resolved(self) -> None:
        with self.assertRaises(ValueError):
            invariance_test_truncated(PARAMS, PARAMS.M // 8 + 1, 1.0, 100, 1, profile=self.profile)


class ResolutionProbeTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.profile = compute_soliton(PARAMS, R_far=50.0)

    def test_zero_data_has_zero_norm(self) -> None:
        grid = PARAMS.grid()
        norms = windowed_norms(np.zeros((3, grid.size)), np.zeros((3, grid.size)), grid)
        np.testing.assert_array_equal(norms, 0.0)

    def test_smooth_bump_lives_in_the_window(self) -> None:
        grid = PARAMS.grid()
        bump = smooth_window_data(grid, amplitude=0.5)
        self.assertAlmostEqual(float(np.max(bump)), 0.5, places=6)
        self.assertFalse(np.any(bump[grid.nodes > 2.0]))

    def test_gibbs_statistic_stays_in_band_while_smooth_data_leaves(self) -> None:
        payload = resolution_probe(PARAMS, [2.0, 4.0, 6.0], 400, 9, profile=self.profile)
        self.assertEqual(payload["times"], [0.0, 2.0, 4.0, 6.0])
        self.assertTrue(payload["gibbs"]["within_band"], payload["gibbs"]["ratios"])
        smooth = payload["smooth"]["norms"]
        self.assertLess(smooth[-1], 0.25 * smooth[0])

    def test_velocities_do_not_depend_on_the_positions(self) -> None:
        weighted, W = gibbs_phase_ensemble(PARAMS, self.profile, 400, 9)
        noise = sample_white_noise(PARAMS.R, PARAMS.M, 9, 400, pinned=False)
        np.testing.assert_array_equal(W, noise.values)
        self.assertEqual(weighted.count, 400)

    def test_horizon_beyond_window_is_refused(self) -> None:
        with self.assertRaises(ValueError):
            resolution_probe(PARAMS, [7.0], 10, 1, profile=self.profile)


if __name__ == "__main__":
    unittest.main()
