"""Exception hierarchy for aggfov.

Every error raised on purpose by the package derives from AggFovError so the
CLI can map it to an exit code. The subclasses also derive from the closest
builtin exception, which keeps ``except ValueError`` call sites working.
"""

from typing import Optional


class AggFovError(Exception):
    """Base class for all aggfov errors."""


class ConfigError(AggFovError, ValueError):
    """Invalid configuration or hyperparameter."""


class ShapeError(AggFovError, ValueError):
    """Tensor shapes are incompatible with an operation."""


class DimensionError(ShapeError):
    """A spatial axis violates a divisibility contract."""

    def __init__(self, axis: str, size: int, divisor: int):
        self.axis = axis
        self.size = size
        self.divisor = divisor
        super().__init__(f"{axis} {size} is not divisible by {divisor}")


class NonFiniteError(AggFovError, FloatingPointError):
    """NaN or Inf encountered where finite values are required."""


class NetpbmError(AggFovError, ValueError):
    """Malformed PGM/PPM payload."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")


class DatasetError(AggFovError):
    """Manifest or batch assembly problem."""


class ManifestNotFoundError(DatasetError):
    """The manifest file does not exist."""


class CheckpointError(AggFovError):
    """Base class for checkpoint load failures."""


class BadMagicError(CheckpointError):
    """File does not start with the checkpoint magic."""


class UnsupportedVersionError(CheckpointError):
    """Checkpoint format version is not understood."""


class TruncatedCheckpointError(CheckpointError):
    """Checkpoint ended before all declared data was read."""


class MissingParameterError(CheckpointError):
    """An expected parameter is absent from the checkpoint."""

    def __init__(self, name: str, found: Optional[list[str]] = None):
        self.name = name
        self.found = found or []
        super().__init__(f"missing parameter: {name}")


class ShapeMismatchError(CheckpointError):
    """A checkpoint tensor does not match the registry shape."""

    def __init__(
        self, name: str, expected: tuple[int, ...], actual: tuple[int, ...]
    ):
        self.name = name
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"shape mismatch for {name}: expected {expected}, got {actual}"
        )


EXIT_RUNTIME = 1
EXIT_USAGE = 2


def exit_code(error: AggFovError) -> int:
    """CLI exit status for an error: 2 for usage problems, 1 otherwise."""
    if isinstance(error, (ConfigError, ManifestNotFoundError)):
        return EXIT_USAGE
    return EXIT_RUNTIME
