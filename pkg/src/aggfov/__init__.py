"""aggfov - depth to RGB modality hallucination with aggregated fields of view."""

from aggfov._version import __version__

__all__ = ["__version__"]
