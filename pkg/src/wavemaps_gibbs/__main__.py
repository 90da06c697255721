"""Executable entry point: ``python -m wavemaps_gibbs <command> [flags]``."""

from __future__ import annotations

from wavemaps_gibbs.cli import main


if __name__ == "__main__":
    raise SystemExit(main())
