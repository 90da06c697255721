"""Command-line front end for the lab.

``wavemaps-gibbs <command> [flags]`` with commands soliton, greens, sample,
gibbs, evolve, invariance, probe, accept and serve. Flags override values read
from ``--config`` (a JSON object or ``key=value`` lines). Every file written
embeds the version string, the resolved configuration and the seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Literal, Mapping, Optional, Sequence

import numpy as np
import uvicorn
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from wavemaps_gibbs.app import app
from wavemaps_gibbs.config import build_lab_paths, resolve_version
from wavemaps_gibbs.core.grid import ModelParams, PhaseState
from wavemaps_gibbs.core.io import matrix_frame, write_ensemble_binary, write_frame_csv, write_json
from wavemaps_gibbs.services.acceptance import run_acceptance
from wavemaps_gibbs.services.dynamics import FlowConfig, evolve
from wavemaps_gibbs.services.gibbs import PcnConfig, build_gibbs_report, resample
from wavemaps_gibbs.services.invariance import (
    gibbs_phase_ensemble,
    invariance_test_full,
    invariance_test_truncated,
    resolution_probe,
)
from wavemaps_gibbs.services.measures import GaussianSampler, growth_and_holder_diagnostic, sample_gaussian
from wavemaps_gibbs.services.operator import assemble, build_greens_report, eigendecompose
from wavemaps_gibbs.services.soliton import SolitonProfile, build_soliton_report, load_soliton, soliton_frame

logger = logging.getLogger(__name__)

Command = Literal["soliton", "greens", "sample", "gibbs", "evolve", "invariance", "probe", "accept", "serve"]
COMMANDS: tuple[str, ...] = ("soliton", "greens", "sample", "gibbs", "evolve", "invariance", "probe", "accept", "serve")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class RunConfig(BaseModel):
    """Resolved configuration of one command run."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    command: Command
    n: int = 1
    k: int = 1
    R: float = 40.0
    M: int = 1024
    N: Optional[int] = None
    seed: int = 42
    samples: int = 1000
    R_far: Optional[float] = None
    scheme: Literal["cfl1", "leapfrog"] = "cfl1"
    dt: Optional[float] = None
    T: float = 1.0
    snapshots: tuple[float, ...] = ()
    data: Literal["bump", "gibbs"] = "bump"
    sampler: Literal["reweight", "pcn"] = "reweight"
    beta: float = 0.3
    steps: int = 1000
    L: Optional[float] = None
    q: tuple[float, ...] = (0.5, 1.0)
    eps: float = 0.05
    horizons: tuple[float, ...] = (10.0, 20.0, 40.0)
    scale: Literal["desk", "smoke"] = "desk"
    only: tuple[str, ...] = ()
    seedless: bool = False
    fault: Optional[str] = None
    output_dir: Optional[Path] = None
    host: str = "127.0.0.1"
    port: int = 8000

    @field_validator("snapshots", "q", "horizons", "only", mode="before")
    @classmethod
    def _split_lists(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(item.strip() for item in value.split(",") if item.strip())
        return value

    @model_validator(mode="after")
    def _check_consistency(self) -> "RunConfig":
        self.params()
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.samples < 1:
            raise ValueError(f"samples must be positive, got {self.samples}")
        if self.N is not None and self.N > self.M - 1:
            raise ValueError(f"truncation N={self.N} exceeds the grid's M - 1 = {self.M - 1} modes")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.T < 0.0:
            raise ValueError(f"evolution time must be non-negative, got {self.T}")
        return self

    def params(self) -> ModelParams:
        return ModelParams(n=self.n, k=self.k, R=self.R, M=self.M, N=self.N)

    def to_report(self) -> dict[str, Any]:
        return self.model_dump(mode="json")


def read_config_file(path: Path) -> dict[str, Any]:
    """Load a JSON object or ``key=value`` lines (``#`` starts a comment)."""

    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        loaded = json.loads(text)
        if not isinstance(loaded, dict):
            raise ValueError(f"config file {path} must hold a JSON object")
        return loaded
    values: dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{number}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", type=Path, help="JSON or key=value file; flags override its values")
    common.add_argument("--n", type=int, help="Degree of the wave map (default 1)")
    common.add_argument("--k", type=int, help="Equivariance class (default 1)")
    common.add_argument("--R", type=float, help="Outer radius (default 40)")
    common.add_argument("--M", type=int, help="Number of grid intervals (default 1024)")
    common.add_argument("--N", type=int, help="Spectral truncation")
    common.add_argument("--seed", type=int, help="Base seed (default 42)")
    common.add_argument("--samples", type=int, help="Ensemble size")
    common.add_argument("--R-far", dest="R_far", type=float, help="Far radius of the soliton solve")
    common.add_argument("--output-dir", dest="output_dir", type=Path, help="Directory for run artefacts")
    common.add_argument("-v", "--verbose", action="count", help="Increase log verbosity")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="wavemaps-gibbs", description=__doc__, parents=[common])
    commands = parser.add_subparsers(dest="command", metavar="command")

    commands.add_parser("soliton", parents=[common], help="Soliton profile and its summary")
    commands.add_parser("greens", parents=[common], help="Green's matrix with symmetry and bound constants")

    sample = commands.add_parser("sample", parents=[common], help="Gaussian ensemble and growth/Hölder diagnostics")
    sample.add_argument("--eps", type=float, help="Exponent slack of the growth/Hölder diagnostic")

    gibbs = commands.add_parser("gibbs", parents=[common], help="Gibbs ensemble, Z, ESS and exponential moments")
    gibbs.add_argument("--sampler", choices=("reweight", "pcn"), help="Importance reweighting or pCN chain")
    gibbs.add_argument("--beta", type=float, help="pCN step size in (0, 1)")
    gibbs.add_argument("--steps", type=int, help="pCN steps per chain")
    gibbs.add_argument("--L", type=float, help="Potential window [1, L]")
    gibbs.add_argument("--q", help="Comma-separated exponential-moment orders")

    evolve = commands.add_parser("evolve", parents=[common], help="Evolve one initial state")
    evolve.add_argument("--scheme", choices=("cfl1", "leapfrog"))
    evolve.add_argument("--dt", type=float)
    evolve.add_argument("--T", type=float, help="Final time")
    evolve.add_argument("--snapshots", help="Comma-separated snapshot times")
    evolve.add_argument("--data", choices=("bump", "gibbs"), help="Smooth bump or one Gibbs-typical sample")

    invariance = commands.add_parser("invariance", parents=[common], help="Invariance test of the Gibbs measure")
    invariance.add_argument("--T", type=float, help="Final time")

    probe = commands.add_parser("probe", parents=[common], help="Windowed-norm resolution probe")
    probe.add_argument("--horizons", help="Comma-separated probe times")

    accept = commands.add_parser("accept", parents=[common], help="Run the acceptance suite")
    accept.add_argument("--scale", choices=("desk", "smoke"))
    accept.add_argument("--only", help="Comma-separated criterion numbers or names")
    accept.add_argument("--seedless", action="store_true", default=argparse.SUPPRESS, help="Draw the base seed from fresh entropy")
    accept.add_argument("--fault", help="Inject a known fault (greens_symmetry)")

    serve = commands.add_parser("serve", parents=[common], help="Serve the read-only HTTP API")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    return parser


def parse_config(argv: Sequence[str], config_file: Optional[Path] = None) -> RunConfig:
    """Resolve flags over an optional config file into a validated `RunConfig`.

    Unknown flags exit through argparse; inconsistent values raise
    ``pydantic.ValidationError``.
    """

    namespace = vars(build_parser().parse_args(list(argv)))
    namespace.pop("verbose", None)
    config_path = namespace.pop("config", None) or config_file
    values: dict[str, Any] = read_config_file(config_path) if config_path is not None else {}
    values.update({key: value for key, value in namespace.items() if value is not None})
    values.setdefault("command", "accept")
    return RunConfig(**values)


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT)


def _verbosity(argv: Sequence[str]) -> int:
    short = sum(len(token) - 1 for token in argv if token.startswith("-v") and set(token[1:]) == {"v"})
    return short + sum(token == "--verbose" for token in argv)


def envelope(cfg: RunConfig, payload: Mapping[str, Any]) -> dict[str, Any]:
    return {"version": resolve_version(), "config": cfg.to_report(), "seed": cfg.seed, "report": dict(payload)}


def _artefacts(cfg: RunConfig) -> Path:
    directory = build_lab_paths(cfg.output_dir).output_dir / cfg.command
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _profile(cfg: RunConfig) -> SolitonProfile:
    return load_soliton(cfg.params(), cfg.R_far)


def run_soliton(cfg: RunConfig) -> Path:
    profile = _profile(cfg)
    directory = _artefacts(cfg)
    write_frame_csv(soliton_frame(profile), directory / "soliton.csv")
    return write_json(directory / "soliton.json", envelope(cfg, build_soliton_report(profile)))


def run_greens(cfg: RunConfig) -> Path:
    payload, G = build_greens_report(cfg.params(), _profile(cfg))
    directory = _artefacts(cfg)
    write_frame_csv(matrix_frame(G.grid.nodes, G.values), directory / "greens.csv")
    header = {"kind": "greens", "params": cfg.params().to_dict(), "version": resolve_version(), "seed": cfg.seed}
    write_ensemble_binary(directory / "greens.bin", G.values, header)
    return write_json(directory / "greens.json", envelope(cfg, payload))


def run_sample(cfg: RunConfig) -> Path:
    params = cfg.params()
    sampler = GaussianSampler(basis=eigendecompose(assemble(params, _profile(cfg))), params=params, cutoff=cfg.N)
    ensemble = sample_gaussian(sampler, cfg.seed, cfg.samples)
    directory = _artefacts(cfg)
    ensemble.write(directory / "ensemble.bin", version=resolve_version(), config=cfg.to_report())
    return write_json(directory / "sample.json", envelope(cfg, growth_and_holder_diagnostic(ensemble, cfg.eps)))


def run_gibbs(cfg: RunConfig) -> Path:
    params = cfg.params()
    profile = _profile(cfg)
    op = assemble(params, profile)
    payload, ensemble = build_gibbs_report(
        GaussianSampler(basis=eigendecompose(op), params=params),
        profile,
        method=cfg.sampler,
        seed=cfg.seed,
        count=cfg.samples,
        L=cfg.L,
        N=cfg.N,
        q_values=cfg.q,
        steps=cfg.steps,
        config=PcnConfig(beta=cfg.beta, seed=cfg.seed),
        op=op,
    )
    directory = _artefacts(cfg)
    ensemble.write(directory / "gibbs.bin", version=resolve_version(), config=cfg.to_report())
    return write_json(directory / "gibbs.json", envelope(cfg, payload))


def initial_state(cfg: RunConfig, profile: SolitonProfile) -> PhaseState:
    """Smooth bump at the middle of the interval, or one resampled Gibbs-typical state."""

    grid = cfg.params().grid()
    if cfg.data == "bump":
        centre = 0.5 * (1.0 + grid.R)
        return PhaseState.from_arrays(grid, 0.2 * np.exp(-((grid.nodes - centre) ** 2)), np.zeros(grid.size))
    weighted, W = gibbs_phase_ensemble(cfg.params(), profile, cfg.samples, cfg.seed)
    return PhaseState.from_arrays(grid, resample(weighted, cfg.seed, 1).values[0], W[0])


def run_evolve(cfg: RunConfig) -> Path:
    profile = _profile(cfg)
    flow = FlowConfig(T=cfg.T, dt=cfg.dt, scheme=cfg.scheme, N=cfg.N, snapshots=cfg.snapshots, track_energy=True)
    trajectory = evolve(initial_state(cfg, profile), flow, profile)
    directory = _artefacts(cfg)
    trajectory.write(directory, version=resolve_version(), config=cfg.to_report(), seed=cfg.seed)
    return write_json(directory / "evolve.json", envelope(cfg, trajectory.manifest()))


def run_invariance(cfg: RunConfig) -> tuple[Path, bool]:
    params = cfg.params()
    profile = _profile(cfg)
    if cfg.N is None:
        report = invariance_test_full(params, cfg.T, cfg.samples, cfg.seed, profile=profile)
    else:
        report = invariance_test_truncated(params, cfg.N, cfg.T, cfg.samples, cfg.seed, profile=profile)
    path = write_json(_artefacts(cfg) / "invariance.json", envelope(cfg, report.to_dict()))
    return path, report.passed


def run_probe(cfg: RunConfig) -> Path:
    payload = resolution_probe(cfg.params(), cfg.horizons, cfg.samples, cfg.seed, profile=_profile(cfg))
    return write_json(_artefacts(cfg) / "probe.json", envelope(cfg, payload))


def run_all_acceptance(cfg: RunConfig) -> int:
    """Run the acceptance suite; exit code 0 when every selected criterion passes."""

    report = run_acceptance(
        scale=cfg.scale,
        only=cfg.only or None,
        seed=cfg.seed,
        seedless=cfg.seedless,
        fault=cfg.fault,
        output_dir=_artefacts(cfg),
        config=cfg.to_report(),
    )
    print(report.summary_text(), end="")
    return report.exit_code


def run_serve(cfg: RunConfig) -> int:  # pragma: no cover - runtime only
    uvicorn.run(app, host=cfg.host, port=cfg.port)
    return 0


def run_command(cfg: RunConfig) -> int:
    if cfg.command == "accept":
        return run_all_acceptance(cfg)
    if cfg.command == "serve":
        return run_serve(cfg)
    if cfg.command == "invariance":
        path, passed = run_invariance(cfg)
        print(f"Invariance report written to {path} ({'passed' if passed else 'FAILED'})")
        return 0 if passed else 1
    runners = {
        "soliton": run_soliton,
        "greens": run_greens,
        "sample": run_sample,
        "gibbs": run_gibbs,
        "evolve": run_evolve,
        "probe": run_probe,
    }
    path = runners[cfg.command](cfg)
    print(f"{cfg.command.capitalize()} report written to {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        build_parser().print_help()
        return 0
    configure_logging(_verbosity(argv))
    try:
        cfg = parse_config(argv)
    except ValidationError as exc:
        raise SystemExit(f"invalid configuration: {exc}") from exc
    except (OSError, ValueError) as exc:
        raise SystemExit(f"could not read configuration: {exc}") from exc
    try:
        return run_command(cfg)
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        logger.debug("command %s failed", cfg.command, exc_info=True)
        raise SystemExit(f"{cfg.command} failed: {exc}") from exc


__all__ = [
    "COMMANDS",
    "RunConfig",
    "build_parser",
    "main",
    "parse_config",
    "read_config_file",
    "run_all_acceptance",
    "run_command",
]


if __name__ == "__main__":  # pragma: no cover - exercised via CLI
    raise SystemExit(main())
