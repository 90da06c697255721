"""Integration tests running the acceptance script end-to-end at smoke scale."""

from __future__ import annotations

import contextlib
import importlib.util
import io
import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from wavemaps_gibbs.config import CACHE_DIR_ENV

SCRIPT = Path(__file__).resolve().parents[2] / "scripts" / "run_acceptance.py"


def _load_script():
    spec = importlib.util.spec_from_file_location("run_acceptance", SCRIPT)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


class AcceptanceScriptTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls._tmp = tempfile.TemporaryDirectory()
        cls.root = Path(cls._tmp.name)
        cls.script = _load_script()

    @classmethod
    def tearDownClass(cls) -> None:
        cls._tmp.cleanup()

    def _run(self, *argv: str) -> tuple[int, str]:
        out = io.StringIO()
        with patch.dict(os.environ, {CACHE_DIR_ENV: str(self.root / "cache")}), contextlib.redirect_stdout(out):
            code = self.script.main(list(argv))
        return code, out.getvalue()

    def test_selected_criteria_pass_and_write_both_reports(self) -> None:
        target = self.root / "pass"
        code, out = self._run(
            "--scale", "smoke", "--only", "greens_closed_form", "10", "--output-dir", str(target)
        )
        self.assertEqual(code, 0, out)
        self.assertIn("2/2 passed", out)
        report = json.loads((target / "acceptance.json").read_text(encoding="utf-8"))
        self.assertTrue(report["passed"])
        self.assertEqual([entry["number"] for entry in report["criteria"]], [1, 10])
        self.assertEqual(report["scale"]["name"], "smoke")
        self.assertTrue((target / "acceptance.txt").read_text(encoding="utf-8").startswith("acceptance (smoke"))

    def test_injected_fault_is_reported_as_failure(self) -> None:
        target = self.root / "fault"
        code, out = self._run(
            "--scale", "smoke", "--only", "2", "--fault", "greens_symmetry", "--output-dir", str(target)
        )
        self.assertEqual(code, 1)
        self.assertIn("FAIL  2 greens_symmetry_and_bounds", out)


if __name__ == "__main__":
    unittest.main()
