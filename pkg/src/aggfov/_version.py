"""aggfov version information.

The version is read from the installed distribution metadata; a source tree
that was never installed reports ``dev``.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("aggfov")
except PackageNotFoundError:
    __version__ = "dev"

__all__ = ["__version__"]
