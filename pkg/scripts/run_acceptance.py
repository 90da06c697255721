#!/usr/bin/env python3
"""Run the lab's acceptance suite and write the consolidated report."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from wavemaps_gibbs.cli import LOG_FORMAT
from wavemaps_gibbs.config import build_lab_paths
from wavemaps_gibbs.services.acceptance import DEFAULT_SEED, FAULTS, SCALES, run_acceptance


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scale", choices=sorted(SCALES), default="desk", help="Problem sizes (default desk)")
    parser.add_argument(
        "--only",
        nargs="+",
        default=None,
        help="Criterion numbers or names to run (defaults to all fourteen)",
    )
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Base seed (default 42)")
    parser.add_argument("--seedless", action="store_true", help="Draw the base seed from fresh entropy")
    parser.add_argument("--fault", choices=FAULTS, default=None, help="Inject a known fault as a negative control")
    parser.add_argument(
        "--output-dir",
        type=Path,
        default=None,
        help="Directory for acceptance.json and acceptance.txt (defaults to var/runs/accept)",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log progress per criterion")
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv or sys.argv[1:])
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format=LOG_FORMAT)
    output_dir = args.output_dir or build_lab_paths().output_dir / "accept"
    report = run_acceptance(
        scale=args.scale,
        only=args.only,
        seed=args.seed,
        seedless=args.seedless,
        fault=args.fault,
        output_dir=output_dir,
    )
    print(report.summary_text(), end="")
    print(f"Acceptance report written to {output_dir}")
    return report.exit_code


if __name__ == "__main__":  # pragma: no cover - exercised via CLI
    raise SystemExit(main())
