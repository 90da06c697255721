"""Field, report and ensemble serialisation.

Reports are written with sorted keys and fixed separators so that identical
runs produce byte-identical files. Ensembles and trajectories share one binary
container: ``b"WMGL"``, a little-endian ``uint32`` header length, a UTF-8 JSON
header, then little-endian float64 values in C order.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import polars as pl

from wavemaps_gibbs.core.grid import Field, ModelParams

ENSEMBLE_MAGIC = b"WMGL"
_LENGTH = struct.Struct("<I")


def to_jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(item) for item in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if np.isnan(number):
            return None
        if np.isinf(number):
            return "inf" if number > 0 else "-inf"
        return number
    if isinstance(value, Path):
        return str(value)
    return value


def dumps_report(payload: Mapping[str, Any]) -> str:
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2, separators=(",", ": ")) + "\n"


def write_json(path: Path, payload: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(payload), encoding="utf-8")
    return path


def read_json(path: Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def field_frame(field: Field, **extra: np.ndarray) -> pl.DataFrame:
    """Columns ``r`` and ``value`` plus any extra per-node columns."""

    columns: dict[str, Any] = {"r": field.grid.nodes, "value": field.values}
    for name, column in extra.items():
        columns[name] = np.asarray(column, dtype=float)
    return pl.DataFrame(columns)


def write_frame_csv(frame: pl.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.write_csv(path, float_precision=17)
    return path


def write_field_csv(field: Field, path: Path) -> Path:
    return write_frame_csv(field_frame(field), path)


def matrix_frame(nodes: np.ndarray, values: np.ndarray) -> pl.DataFrame:
    """Long form ``r, rho, value`` of a kernel sampled on ``nodes x nodes``, row-major."""

    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (nodes.size, nodes.size):
        raise ValueError(f"kernel of shape {values.shape} does not match {nodes.size} nodes")
    r, rho = np.meshgrid(nodes, nodes, indexing="ij")
    return pl.DataFrame({"r": r.ravel(), "rho": rho.ravel(), "value": values.ravel()})


def read_matrix_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of `matrix_frame` written through `write_frame_csv`: ``(nodes, values)``."""

    frame = pl.read_csv(path)
    if frame.columns != ["r", "rho", "value"]:
        raise ValueError(f"{path}: expected columns r, rho, value, got {frame.columns}")
    size = math.isqrt(frame.height)
    if size * size != frame.height:
        raise ValueError(f"{path}: {frame.height} rows do not form a square kernel")
    nodes = frame["rho"].to_numpy()[:size]
    return nodes, frame["value"].to_numpy().reshape(size, size)


def field_envelope(field: Field, params: ModelParams | None, seed: int | None, version: str) -> dict[str, Any]:
    return {
        "version": version,
        "params": params.to_dict() if params is not None else None,
        "seed": seed,
        "grid": {"R": field.grid.R, "M": field.grid.M},
        "values": field.values.tolist(),
    }


def write_ensemble_binary(path: Path, values: np.ndarray, header: Mapping[str, Any]) -> Path:
    """Write an array of samples (any shape) with a JSON header."""

    values = np.ascontiguousarray(values, dtype="<f8")
    meta = dict(to_jsonable(header))
    meta["shape"] = list(values.shape)
    encoded = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        handle.write(ENSEMBLE_MAGIC)
        handle.write(_LENGTH.pack(len(encoded)))
        handle.write(encoded)
        handle.write(values.tobytes(order="C"))
    return path


def read_ensemble_binary(path: Path) -> tuple[dict[str, Any], np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != ENSEMBLE_MAGIC:
        raise ValueError(f"{path} is not an ensemble container (bad magic {data[:4]!r})")
    (length,) = _LENGTH.unpack_from(data, 4)
    start = 4 + _LENGTH.size
    header = json.loads(data[start : start + length].decode("utf-8"))
    payload = np.frombuffer(data, dtype="<f8", offset=start + length)
    shape = tuple(header.get("shape", [payload.size]))
    if int(np.prod(shape)) != payload.size:
        raise ValueError(f"{path}: payload holds {payload.size} values, header promises shape {shape}")
    return header, payload.reshape(shape).astype(float)


__all__ = [
    "ENSEMBLE_MAGIC",
    "dumps_report",
    "field_envelope",
    "field_frame",
    "matrix_frame",
    "read_ensemble_binary",
    "read_json",
    "read_matrix_csv",
    "to_jsonable",
    "write_ensemble_binary",
    "write_field_csv",
    "write_frame_csv",
    "write_json",
]
