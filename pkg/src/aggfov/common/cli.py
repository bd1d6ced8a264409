"""Helpers shared by the component CLIs."""

import sys
from contextlib import contextmanager
from typing import Iterator

import click

from aggfov.common.config import CommonSettings
from aggfov.common.errors import AggFovError, exit_code


@contextmanager
def command_errors() -> Iterator[None]:
    """Turn package errors into a message on stderr and an exit status."""
    try:
        yield
    except AggFovError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(exit_code(e))


def apply_settings(settings: CommonSettings) -> None:
    """Push process-wide settings into the numeric core."""
    from aggfov.autodiff.conv import set_num_threads
    from aggfov.autodiff.tensor import set_debug

    set_num_threads(settings.threads)
    set_debug(settings.debug)
