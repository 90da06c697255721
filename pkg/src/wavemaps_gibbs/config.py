"""Application configuration helpers.

Centralizes filesystem paths and environment-driven overrides used across the
lab. This module avoids third-party dependencies so it can be imported before
the numerical stack is installed.
"""

from __future__ import annotations

import os
import subprocess
from dataclasses import dataclass
from pathlib import Path

PACKAGE_VERSION = "0.1.0"

REPO_ROOT = Path(__file__).resolve().parents[2]
DEFAULT_OUTPUT_DIR = REPO_ROOT / "var" / "runs"
DEFAULT_CACHE_DIR = REPO_ROOT / "var" / "cache"

OUTPUT_DIR_ENV = "WAVEMAPS_GIBBS_OUTPUT_DIR"
CACHE_DIR_ENV = "WAVEMAPS_GIBBS_CACHE_DIR"


@dataclass(frozen=True)
class LabPaths:
    """Resolved filesystem locations for run artefacts."""

    output_dir: Path
    cache_dir: Path

    def ensure_dirs(self) -> None:
        """Create the output and cache directories if they do not exist."""

        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.cache_dir.mkdir(parents=True, exist_ok=True)


def resolve_output_dir(explicit: Path | None = None) -> Path:
    """Return the output directory.

    An explicit path wins; otherwise ``WAVEMAPS_GIBBS_OUTPUT_DIR`` is honoured
    before falling back to ``var/runs`` inside the repository.
    """

    if explicit is not None:
        return Path(explicit).expanduser().resolve()
    override = os.getenv(OUTPUT_DIR_ENV)
    if override:
        return Path(override).expanduser().resolve()
    return DEFAULT_OUTPUT_DIR


def resolve_cache_dir() -> Path:
    """Return the cache directory location with env override support."""

    override = os.getenv(CACHE_DIR_ENV)
    if override:
        return Path(override).expanduser().resolve()
    return DEFAULT_CACHE_DIR


def build_lab_paths(output_dir: Path | None = None) -> LabPaths:
    """Construct a `LabPaths` instance using resolution helpers."""

    return LabPaths(
        output_dir=resolve_output_dir(output_dir),
        cache_dir=resolve_cache_dir(),
    )


def resolve_version() -> str:
    """Return a git-describe style version string.

    Falls back to the package version when the checkout has no git metadata
    (sdist installs, CI artefacts).
    """

    try:
        result = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=REPO_ROOT,
            capture_output=True,
            text=True,
            timeout=5,
            check=False,
        )
    except (OSError, subprocess.SubprocessError):
        return PACKAGE_VERSION
    described = result.stdout.strip()
    if result.returncode != 0 or not described:
        return PACKAGE_VERSION
    return f"{PACKAGE_VERSION}+{described}"


__all__ = [
    "CACHE_DIR_ENV",
    "DEFAULT_CACHE_DIR",
    "DEFAULT_OUTPUT_DIR",
    "LabPaths",
    "OUTPUT_DIR_ENV",
    "PACKAGE_VERSION",
    "REPO_ROOT",
    "build_lab_paths",
    "resolve_cache_dir",
    "resolve_output_dir",
    "resolve_version",
]
