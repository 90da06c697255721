"""Tests for the d'Alembert and Duhamel kernels."""

from __future__ import annotations

import unittest

import numpy as np

from wavemaps_gibbs.core.grid import Field, RadialGrid
from wavemaps_gibbs.core.wave import dalembert_linear, duhamel, duhamel_values


def _mode(grid: RadialGrid) -> Field:
    return Field.from_function(grid, lambda r: np.sin(np.pi * (r - 1.0) / (grid.R - 1.0)))


class DalembertTests(unittest.TestCase):
    def setUp(self) -> None:
        self.grid = RadialGrid(R=11.0, M=200)
        rng = np.random.default_rng(11)
        psi = rng.normal(size=self.grid.size)
        psi[[0, -1]] = 0.0
        W = np.cumsum(rng.normal(size=self.grid.size)) * np.sqrt(self.grid.h)
        W -= W[0]
        self.f = Field(self.grid, psi)
        self.W = Field(self.grid, W)

    def test_zero_data(self) -> None:
        zero = Field.zeros(self.grid)
        self.assertFalse(np.any(dalembert_linear(zero, zero, 3.7).values))

    def test_identity_at_time_zero(self) -> None:
        np.testing.assert_allclose(dalembert_linear(self.f, self.W, 0.0).values, self.f.values, atol=1e-15)

    def test_standing_wave_on_grid_aligned_times(self) -> None:
        mode = _mode(self.grid)
        zero = Field.zeros(self.grid)
        for steps in (1, 7, 40, 200):
            t = steps * self.grid.h
            expected = np.cos(np.pi * t / (self.grid.R - 1.0)) * mode.values
            np.testing.assert_allclose(dalembert_linear(mode, zero, t).values, expected, atol=1e-12)

    def test_standing_wave_off_grid_is_second_order(self) -> None:
        mode = _mode(self.grid)
        t = 2.3 * self.grid.h + 1.0
        expected = np.cos(np.pi * t / (self.grid.R - 1.0)) * mode.values
        error = np.max(np.abs(dalembert_linear(mode, Field.zeros(self.grid), t).values - expected))
        self.assertLess(error, 2.0 * (np.pi * self.grid.h / 10.0) ** 2)

    def test_full_period_returns_position(self) -> None:
        period = 2.0 * (self.grid.R - 1.0)
        np.testing.assert_allclose(dalembert_linear(self.f, self.W, period).values, self.f.values, atol=1e-12)

    def test_constant_velocity_inside_the_cone(self) -> None:
        W = Field.from_function(self.grid, lambda r: 0.5 * (r - 1.0))
        t = 2.0
        u = dalembert_linear(Field.zeros(self.grid), W, t).values
        nodes = self.grid.nodes
        inside = (nodes - t >= 1.0) & (nodes + t <= self.grid.R)
        np.testing.assert_allclose(u[inside], 0.5 * t, atol=1e-12)


class DuhamelTests(unittest.TestCase):
    def setUp(self) -> None:
        self.grid = RadialGrid(R=11.0, M=100)

    def test_zero_forcing(self) -> None:
        history = np.zeros((21, self.grid.size))
        self.assertFalse(np.any(duhamel(history, self.grid, 2.0).values))

    def test_constant_forcing_fills_the_light_cone(self) -> None:
        t = 2.0
        history = np.full((21, self.grid.size), 3.0)
        value = duhamel(history, self.grid, t).values
        nodes = self.grid.nodes
        inside = (nodes - t >= 1.0) & (nodes + t <= self.grid.R)
        np.testing.assert_allclose(value[inside], 3.0 * t**2 / 2.0, atol=1e-10)

    def test_batched_forcing_matches_rows(self) -> None:
        rng = np.random.default_rng(5)
        history = rng.normal(size=(11, 3, self.grid.size))
        batched = duhamel_values(history, self.grid, 1.0)
        for row in range(3):
            np.testing.assert_allclose(batched[row], duhamel_values(history[:, row, :], self.grid, 1.0))

    def test_mode_forcing_matches_resonant_solution(self) -> None:
        # u_tt - u_rr = sin(w (r-1)) with zero data solves to (1 - cos(w t)) sin(w (r-1)) / w^2
        omega = np.pi / (self.grid.R - 1.0)
        t = 1.5
        steps = 150
        mode = np.sin(omega * (self.grid.nodes - 1.0))
        history = np.tile(mode, (steps + 1, 1))
        value = duhamel(history, self.grid, t).values
        expected = (1.0 - np.cos(omega * t)) * mode / omega**2
        self.assertLess(np.max(np.abs(value - expected)), 2e-3)


if __name__ == "__main__":
    unittest.main()
