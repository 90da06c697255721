"""Tests for report, CSV and binary ensemble serialisation."""

from __future__ import annotations

import tempfile
import unittest
from pathlib import Path

import numpy as np
import polars as pl

from wavemaps_gibbs.core.grid import Field, ModelParams, RadialGrid
from wavemaps_gibbs.core.io import (
    ENSEMBLE_MAGIC,
    dumps_report,
    field_envelope,
    matrix_frame,
    read_ensemble_binary,
    read_matrix_csv,
    write_ensemble_binary,
    write_field_csv,
    write_frame_csv,
)


class ReportSerialisationTests(unittest.TestCase):
    def test_reports_are_sorted_and_numpy_safe(self) -> None:
        payload = {"b": np.float64(1.5), "a": np.arange(3), "flag": np.bool_(True), "missing": float("nan")}
        text = dumps_report(payload)
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertIn('"missing": null', text)
        self.assertEqual(text, dumps_report(dict(reversed(list(payload.items())))))

    def test_field_envelope_embeds_provenance(self) -> None:
        grid = RadialGrid(R=2.0, M=4)
        envelope = field_envelope(Field.zeros(grid), ModelParams(R=2.0, M=4), 42, "0.1.0")
        self.assertEqual(envelope["seed"], 42)
        self.assertEqual(envelope["params"]["M"], 4)
        self.assertEqual(len(envelope["values"]), 5)


class FileFormatTests(unittest.TestCase):
    def test_field_csv_columns(self) -> None:
        grid = RadialGrid(R=2.0, M=4)
        field = Field.from_function(grid, lambda r: r**2)
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_field_csv(field, Path(tmpdir) / "field.csv")
            frame = pl.read_csv(path)
        self.assertEqual(frame.columns, ["r", "value"])
        np.testing.assert_allclose(frame["value"].to_numpy(), field.values)

    def test_kernel_csv_is_long_form_and_reads_back(self) -> None:
        nodes = RadialGrid(R=2.0, M=3).nodes
        kernel = np.minimum.outer(nodes, nodes) - 1.0 + np.arange(16.0).reshape(4, 4) / 7.0
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_frame_csv(matrix_frame(nodes, kernel), Path(tmpdir) / "kernel.csv")
            frame = pl.read_csv(path)
            read_nodes, values = read_matrix_csv(path)
        self.assertEqual(frame.columns, ["r", "rho", "value"])
        self.assertEqual(frame.height, 16)
        self.assertAlmostEqual(frame["value"][1], kernel[0, 1], places=14)
        np.testing.assert_allclose(read_nodes, nodes, rtol=1e-15)
        np.testing.assert_allclose(values, kernel, rtol=1e-15)

    def test_kernel_shape_must_match_nodes(self) -> None:
        with self.assertRaises(ValueError):
            matrix_frame(np.arange(3.0), np.zeros((3, 4)))

    def test_ensemble_container_layout(self) -> None:
        values = np.arange(12.0).reshape(3, 4)
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_ensemble_binary(Path(tmpdir) / "ens.bin", values, {"seed": 7, "kind": "gaussian"})
            raw = path.read_bytes()
            header, loaded = read_ensemble_binary(path)
        self.assertEqual(raw[:4], ENSEMBLE_MAGIC)
        self.assertEqual(raw[-8:], np.float64(11.0).astype("<f8").tobytes())
        self.assertEqual(header["shape"], [3, 4])
        self.assertEqual(header["seed"], 7)
        np.testing.assert_array_equal(loaded, values)

    def test_rejects_foreign_files(self) -> None:
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "other.bin"
            path.write_bytes(b"NOPE" + bytes(8))
            with self.assertRaises(ValueError):
                read_ensemble_binary(path)


if __name__ == "__main__":
    unittest.main()
