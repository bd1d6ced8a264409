"""aggfov CLI entry point."""

import click
from dotenv import load_dotenv
from pydantic import ValidationError

from aggfov import __version__
from aggfov.common.cli import apply_settings, command_errors
from aggfov.common.config import LogLevel, get_common_settings
from aggfov.common.errors import ConfigError
from aggfov.common.logging import configure_logging

# Load .env file early so Click's envvar parameter picks up values
load_dotenv()


@click.group()
@click.version_option(version=__version__, prog_name="aggfov")
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]),
    default="INFO",
    envvar="LOG_LEVEL",
    help="Set logging level",
)
@click.pass_context
def cli(ctx: click.Context, log_level: str) -> None:
    """aggfov - depth to RGB modality hallucination.

    Generates synthetic depth/RGB data, trains the aggregated
    field-of-view encoder-decoder, hallucinates RGB for new depth images
    and scores the results.
    """
    ctx.ensure_object(dict)
    ctx.obj["log_level"] = LogLevel(log_level)
    configure_logging(level=ctx.obj["log_level"])
    with command_errors():
        try:
            apply_settings(get_common_settings())
        except ValidationError as e:
            raise ConfigError(str(e)) from e


# Import and register component CLIs
from aggfov.data.cli import synth  # noqa: E402
from aggfov.model.cli import infer  # noqa: E402
from aggfov.training.cli import evaluate_command, gradcheck, train  # noqa: E402

cli.add_command(synth)
cli.add_command(train)
cli.add_command(infer)
cli.add_command(evaluate_command)
cli.add_command(gradcheck)


def main() -> None:
    """Main entry point."""
    cli()


if __name__ == "__main__":
    main()
