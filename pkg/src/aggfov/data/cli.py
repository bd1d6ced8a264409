"""CLI for the data component."""

import click

from aggfov.common.cli import command_errors


@click.command("synth")
@click.option("--seed", type=int, default=0, show_default=True, help="Generator seed")
@click.option(
    "--count", type=int, default=64, show_default=True, help="Number of pairs"
)
@click.option(
    "--height",
    type=int,
    default=64,
    show_default=True,
    help="Image height (multiple of 16)",
)
@click.option(
    "--width",
    type=int,
    default=80,
    show_default=True,
    help="Image width (multiple of 16)",
)
@click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False),
    default=None,
    help="Output directory (default: {data_home}/synth)",
)
def synth(seed: int, count: int, height: int, width: int, out_dir: str | None) -> None:
    """Generate a synthetic depth/RGB dataset with a manifest.

    Scenes are piecewise-planar rectangles whose colour is a function of
    their depth bucket and that of their largest neighbour, so the mapping
    from depth to RGB is learnable. Same arguments, same bytes.
    """
    from pathlib import Path

    from aggfov.common.config import get_common_settings
    from aggfov.data.dataset import MANIFEST_NAME
    from aggfov.data.synth import synth_generate

    if out_dir is None:
        out_dir = str(Path(get_common_settings().data_home) / "synth")

    with command_errors():
        manifest = synth_generate(seed, count, height, width, out_dir)

    click.echo(f"Wrote {len(manifest)} pairs to {Path(out_dir) / MANIFEST_NAME}")
