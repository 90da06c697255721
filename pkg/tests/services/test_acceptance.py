"""Tests for the acceptance runner: selection, reporting, fault injection and determinism."""

from __future__ import annotations

import json
import tempfile
import unittest
from pathlib import Path

from wavemaps_gibbs.services.acceptance import (
    CRITERIA,
    AcceptanceContext,
    AcceptanceReport,
    CriterionResult,
    SCALES,
    run_acceptance,
    run_criterion,
    select_criteria,
)


class SelectionTests(unittest.TestCase):
    def test_all_fourteen_by_default(self) -> None:
        self.assertEqual(select_criteria(), list(range(1, 15)))
        self.assertEqual(len(CRITERIA), 14)

    def test_numbers_and_names(self) -> None:
        self.assertEqual(select_criteria(["11", "greens_closed_form", 3]), [1, 3, 11])

    def test_unknown_criterion(self) -> None:
        with self.assertRaises(ValueError):
            select_criteria(["15"])
        with self.assertRaises(ValueError):
            select_criteria(["nonsense"])
        with self.assertRaises(ValueError):
            select_criteria([])

    def test_unknown_fault_and_scale(self) -> None:
        with self.assertRaises(ValueError):
            AcceptanceContext(SCALES["smoke"], fault="nothing")
        with self.assertRaises(ValueError):
            run_acceptance(scale="huge", only=[1])  # type: ignore[arg-type]


class ReportTests(unittest.TestCase):
    def _report(self) -> AcceptanceReport:
        results = (
            CriterionResult(1, "greens_closed_form", {"k=0:error": True}),
            CriterionResult(2, "greens_symmetry_and_bounds", {"symmetry": False, "diagonal_lower": True}),
            CriterionResult(3, "resolvent_identity", {}, error="RuntimeError: boom"),
        )
        return AcceptanceReport(scale="smoke", seed=7, seedless=False, fault=None, results=results, version="test")

    def test_pass_and_failure_bookkeeping(self) -> None:
        report = self._report()
        self.assertFalse(report.passed)
        self.assertEqual(report.exit_code, 1)
        self.assertEqual(report.failures, ["2:greens_symmetry_and_bounds", "3:resolvent_identity"])
        self.assertFalse(CriterionResult(4, "empty", {}).passed)

    def test_summary_names_failing_checks(self) -> None:
        text = self._report().summary_text()
        self.assertIn("1/3 passed", text)
        self.assertIn("PASS  1 greens_closed_form", text)
        self.assertIn("FAIL  2 greens_symmetry_and_bounds: symmetry", text)
        self.assertIn("RuntimeError: boom", text)

    def test_payload_embeds_version_seed_and_scale(self) -> None:
        payload = self._report().to_dict()
        self.assertEqual(payload["version"], "test")
        self.assertEqual(payload["seed"], 7)
        self.assertEqual(payload["scale"]["name"], "smoke")
        self.assertEqual(sorted(payload["criteria"]), ["1", "2", "3"])


class SmokeCriteriaTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls._tmp = tempfile.TemporaryDirectory()
        cls.ctx = AcceptanceContext(SCALES["smoke"], cache_dir=Path(cls._tmp.name))

    @classmethod
    def tearDownClass(cls) -> None:
        cls._tmp.cleanup()

    def test_greens_closed_form(self) -> None:
        result = run_criterion(1, self.ctx)
        self.assertTrue(result.passed, result.details)
        self.assertTrue(result.details["k=0"]["exact"])

    def test_dynamics_exactness(self) -> None:
        result = run_criterion(10, self.ctx)
        self.assertTrue(result.passed, result.details)

    def test_finite_speed(self) -> None:
        result = run_criterion(11, self.ctx)
        self.assertTrue(result.passed, result.details)
        self.assertEqual(len(result.details["gaps"]), 8)

    def test_symmetry_fault_is_caught(self) -> None:
        faulty = AcceptanceContext(SCALES["smoke"], fault="greens_symmetry", cache_dir=self.ctx.cache_dir)
        result = run_criterion(2, faulty)
        self.assertFalse(result.passed)
        self.assertIn("symmetry", result.failed_checks)


class RunTests(unittest.TestCase):
    def test_reruns_are_byte_identical(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            first = run_acceptance(scale="smoke", only=[1], output_dir=Path(tmp) / "a", cache_dir=Path(tmp))
            second = run_acceptance(scale="smoke", only=[1], output_dir=Path(tmp) / "b", cache_dir=Path(tmp))
            first_bytes = (Path(tmp) / "a" / "acceptance.json").read_bytes()
            second_bytes = (Path(tmp) / "b" / "acceptance.json").read_bytes()
            summary = (Path(tmp) / "a" / "acceptance.txt").read_text(encoding="utf-8")
        self.assertEqual(first.exit_code, 0)
        self.assertEqual(second.exit_code, 0)
        self.assertEqual(first_bytes, second_bytes)
        self.assertIn("PASS  1 greens_closed_form", summary)
        self.assertEqual(json.loads(first_bytes)["failures"], [])

    def test_seedless_run_records_its_seed(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            report = run_acceptance(scale="smoke", only=[1], seedless=True, cache_dir=Path(tmp))
        self.assertTrue(report.seedless)
        self.assertGreaterEqual(report.seed, 0)
        self.assertTrue(report.to_dict()["seedless"])


if __name__ == "__main__":
    unittest.main()
