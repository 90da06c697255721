"""Tests for configuration parsing and the command-line entry point."""

from __future__ import annotations

import contextlib
import io
import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np
from pydantic import ValidationError

from wavemaps_gibbs.cli import RunConfig, main, parse_config, read_config_file
from wavemaps_gibbs.config import CACHE_DIR_ENV
from wavemaps_gibbs.core.io import read_ensemble_binary, read_matrix_csv


class ParseConfigTests(unittest.TestCase):
    def test_defaults(self) -> None:
        cfg = parse_config([])
        self.assertEqual((cfg.n, cfg.k, cfg.R, cfg.M, cfg.seed), (1, 1, 40.0, 1024, 42))
        self.assertIsNone(cfg.N)

    def test_flat_branch_is_valid(self) -> None:
        cfg = parse_config(["greens", "--k", "2", "--n", "0"])
        self.assertEqual((cfg.command, cfg.n, cfg.k), ("greens", 0, 2))

    def test_flags_before_the_command(self) -> None:
        cfg = parse_config(["--seed", "5", "sample", "--M", "64"])
        self.assertEqual((cfg.seed, cfg.M), (5, 64))

    def test_inadmissible_pair_is_rejected(self) -> None:
        with self.assertRaises(ValidationError):
            parse_config(["greens", "--k", "0", "--n", "1"])

    def test_unknown_flag_exits(self) -> None:
        with contextlib.redirect_stderr(io.StringIO()), self.assertRaises(SystemExit):
            parse_config(["greens", "--colour", "blue"])

    def test_gibbs_sampler_flag(self) -> None:
        self.assertEqual(parse_config(["gibbs"]).sampler, "reweight")
        self.assertEqual(parse_config(["gibbs", "--sampler", "pcn"]).sampler, "pcn")
        with contextlib.redirect_stderr(io.StringIO()), self.assertRaises(SystemExit):
            parse_config(["gibbs", "--sampler", "hmc"])

    def test_truncation_must_fit_the_grid(self) -> None:
        with self.assertRaises(ValidationError):
            parse_config(["evolve", "--M", "16", "--N", "16"])

    def test_flags_override_key_value_file(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "run.cfg"
            path.write_text("# lab run\nn = 0\nk = 2\nseed = 7\nq = 0.5, 1.1\n", encoding="utf-8")
            cfg = parse_config(["gibbs", "--seed", "9"], config_file=path)
        self.assertEqual((cfg.n, cfg.k, cfg.seed), (0, 2, 9))
        self.assertEqual(cfg.q, (0.5, 1.1))

    def test_json_file_through_the_flag(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "run.json"
            path.write_text(json.dumps({"command": "probe", "horizons": [2, 4], "R": 9.0, "M": 96}), encoding="utf-8")
            cfg = parse_config(["--config", str(path)])
        self.assertEqual(cfg.command, "probe")
        self.assertEqual(cfg.horizons, (2.0, 4.0))

    def test_unknown_file_key_is_rejected(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "run.json"
            path.write_text(json.dumps({"colour": "blue"}), encoding="utf-8")
            with self.assertRaises(ValidationError):
                parse_config(["soliton"], config_file=path)

    def test_malformed_key_value_line(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "run.cfg"
            path.write_text("n 0\n", encoding="utf-8")
            with self.assertRaises(ValueError):
                read_config_file(path)

    def test_report_form_is_serialisable(self) -> None:
        cfg = RunConfig(command="evolve", output_dir=Path("/tmp/out"), snapshots=(0.5,))
        report = cfg.to_report()
        self.assertEqual(report["output_dir"], "/tmp/out")
        self.assertEqual(report["snapshots"], [0.5])
        json.dumps(report)


class MainTests(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.root = Path(self._tmp.name)
        self._env = patch.dict(os.environ, {CACHE_DIR_ENV: str(self.root / "cache")})
        self._env.start()

    def tearDown(self) -> None:
        self._env.stop()
        self._tmp.cleanup()

    def _run(self, *argv: str) -> tuple[int, str]:
        out = io.StringIO()
        with contextlib.redirect_stdout(out):
            code = main([*argv, "--output-dir", str(self.root / "runs")])
        return code, out.getvalue()

    def test_no_arguments_prints_help(self) -> None:
        out = io.StringIO()
        with contextlib.redirect_stdout(out):
            self.assertEqual(main([]), 0)
        self.assertIn("wavemaps-gibbs", out.getvalue())

    def test_invalid_configuration_exits_with_message(self) -> None:
        with self.assertRaises(SystemExit) as caught:
            main(["greens", "--n", "1", "--k", "0"])
        self.assertIn("invalid configuration", str(caught.exception.code))

    def test_soliton_report_embeds_version_config_and_seed(self) -> None:
        code, out = self._run("soliton", "--n", "0", "--k", "1", "--R", "5", "--M", "40")
        self.assertEqual(code, 0)
        self.assertIn("Soliton report written", out)
        payload = json.loads((self.root / "runs" / "soliton" / "soliton.json").read_text(encoding="utf-8"))
        self.assertEqual(set(payload), {"version", "config", "seed", "report"})
        self.assertEqual(payload["config"]["command"], "soliton")
        self.assertEqual(payload["seed"], 42)
        self.assertTrue((self.root / "runs" / "soliton" / "soliton.csv").exists())

    def test_sample_reruns_are_byte_identical(self) -> None:
        argv = ("sample", "--n", "0", "--k", "1", "--R", "5", "--M", "32", "--samples", "20", "--seed", "3")
        self._run(*argv)
        first = (self.root / "runs" / "sample" / "sample.json").read_bytes()
        binary = (self.root / "runs" / "sample" / "ensemble.bin").read_bytes()
        self._run(*argv)
        self.assertEqual((self.root / "runs" / "sample" / "sample.json").read_bytes(), first)
        self.assertEqual((self.root / "runs" / "sample" / "ensemble.bin").read_bytes(), binary)
        self.assertTrue(binary.startswith(b"WMGL"))

    def test_greens_writes_matrix_csv(self) -> None:
        code, _ = self._run("greens", "--n", "0", "--k", "1", "--R", "5", "--M", "40")
        self.assertEqual(code, 0)
        directory = self.root / "runs" / "greens"
        nodes, values = read_matrix_csv(directory / "greens.csv")
        self.assertEqual(values.shape, (41, 41))
        self.assertAlmostEqual(nodes[0], 1.0)
        self.assertAlmostEqual(nodes[-1], 5.0)
        _, binary = read_ensemble_binary(directory / "greens.bin")
        np.testing.assert_allclose(values, binary, rtol=1e-14, atol=1e-300)
        np.testing.assert_allclose(values, values.T, atol=1e-10 * float(np.max(np.abs(values))))
        self.assertTrue((directory / "greens.json").exists())

    def test_gibbs_report_carries_the_sampler_cross_check(self) -> None:
        code, _ = self._run(
            "gibbs", "--sampler", "pcn", "--n", "0", "--k", "1", "--R", "5", "--M", "32",
            "--samples", "60", "--steps", "200", "--q", "0.5",
        )
        self.assertEqual(code, 0)
        payload = json.loads((self.root / "runs" / "gibbs" / "gibbs.json").read_text(encoding="utf-8"))
        self.assertEqual(payload["config"]["sampler"], "pcn")
        self.assertEqual(payload["report"]["method"], "pcn")
        self.assertIn("agree", payload["report"]["cross_check"])
        self.assertIn("V", payload["report"]["cross_check"]["observables"])

    def test_evolve_writes_trajectory_and_manifest(self) -> None:
        code, _ = self._run(
            "evolve", "--n", "0", "--k", "0", "--R", "11", "--M", "100", "--T", "2", "--snapshots", "1", "--scheme", "leapfrog"
        )
        self.assertEqual(code, 0)
        directory = self.root / "runs" / "evolve"
        manifest = json.loads((directory / "evolve.json").read_text(encoding="utf-8"))
        times = manifest["report"]["times"]
        self.assertEqual(len(times), 3)
        for got, want in zip(times, (0.0, 1.0, 2.0)):
            self.assertAlmostEqual(got, want, places=9)
        self.assertTrue((directory / "trajectory.bin").exists())

    def test_accept_with_symmetry_fault_fails_and_names_the_criterion(self) -> None:
        code, out = self._run("accept", "--scale", "smoke", "--only", "2", "--fault", "greens_symmetry")
        self.assertEqual(code, 1)
        self.assertIn("FAIL  2 greens_symmetry_and_bounds", out)
        report = json.loads((self.root / "runs" / "accept" / "acceptance.json").read_text(encoding="utf-8"))
        self.assertEqual(report["failures"], ["2:greens_symmetry_and_bounds"])
        self.assertEqual(report["config"]["fault"], "greens_symmetry")


if __name__ == "__main__":
    unittest.main()
