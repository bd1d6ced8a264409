"""Logging setup for aggfov.

Console records go to stderr so command summaries on stdout stay clean. A
training run also mirrors the package log into ``<run_dir>/train.log`` using
the run format, where every line carries the optimizer step it belongs to.
"""

import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

from aggfov.common.config import LogLevel

PACKAGE_LOGGER = "aggfov"

CONSOLE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

RUN_FORMAT = (
    "%(asctime)s | %(levelname)-8s | %(name)s | step=%(step)s | %(message)s"
)

RUN_LOG_NAME = "train.log"


class StepFilter(logging.Filter):
    """Stamp ``step="-"`` on records logged outside a training step."""

    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, "step"):
            record.step = "-"
        return True


def _numeric_level(level: LogLevel | str) -> int:
    name = level.value if isinstance(level, LogLevel) else level.upper()
    return int(getattr(logging, name, logging.INFO))


def configure_logging(
    level: LogLevel | str = LogLevel.INFO,
    format_string: Optional[str] = None,
) -> None:
    """Configure console logging.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        format_string: Custom log format string (optional)
    """
    numeric_level = _numeric_level(level)
    if format_string is None:
        format_string = CONSOLE_FORMAT

    handler = logging.StreamHandler(sys.stderr)
    handler.addFilter(StepFilter())
    logging.basicConfig(level=numeric_level, format=format_string, handlers=[handler])

    logging.getLogger("hypothesis").setLevel(logging.WARNING)
    logging.getLogger(PACKAGE_LOGGER).setLevel(numeric_level)


@contextmanager
def run_log(run_dir: str | Path) -> Iterator[Path]:
    """Append package log records to ``<run_dir>/train.log`` while active."""
    directory = Path(run_dir)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / RUN_LOG_NAME

    handler = logging.FileHandler(path, mode="a", encoding="utf-8")
    handler.setFormatter(logging.Formatter(RUN_FORMAT))
    handler.addFilter(StepFilter())
    package = logging.getLogger(PACKAGE_LOGGER)
    package.addHandler(handler)
    try:
        yield path
    finally:
        package.removeHandler(handler)
        handler.close()


class ComponentLogger:
    """Logger for one component under ``aggfov.<component>``.

    Keyword arguments become record attributes, so ``step=`` fills the
    step column of the run format.
    """

    def __init__(self, component: str):
        self.component = component
        self._logger = logging.getLogger(f"{PACKAGE_LOGGER}.{component}")

    def debug(self, message: str, **kwargs: object) -> None:
        """Log a debug message."""
        self._logger.debug(message, extra=kwargs)

    def info(self, message: str, **kwargs: object) -> None:
        """Log an info message."""
        self._logger.info(message, extra=kwargs)

    def warning(self, message: str, **kwargs: object) -> None:
        """Log a warning message."""
        self._logger.warning(message, extra=kwargs)

    def error(self, message: str, **kwargs: object) -> None:
        """Log an error message."""
        self._logger.error(message, extra=kwargs)


def get_component_logger(component: str) -> ComponentLogger:
    """Get a component-specific logger."""
    return ComponentLogger(component)
