"""Numerical laboratory for Gibbs measures of exterior equivariant wave maps."""

from wavemaps_gibbs.config import PACKAGE_VERSION

__version__ = PACKAGE_VERSION

__all__ = ["__version__"]
