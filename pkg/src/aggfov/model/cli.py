"""CLI for the model component."""

import click

from aggfov.common.cli import command_errors


@click.command("infer")
@click.option(
    "--checkpoint",
    type=click.Path(dir_okay=False),
    required=True,
    help="Trained checkpoint",
)
@click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False),
    required=True,
    help="Directory for the hallucinated PPM files",
)
@click.argument("inputs", nargs=-1, required=True)
def infer(checkpoint: str, out_dir: str, inputs: tuple[str, ...]) -> None:
    """Hallucinate RGB images for depth INPUTS.

    Each input is a PGM file, a directory of PGM files or a dataset
    manifest. Height and width must be multiples of 16.
    """
    from aggfov.model.inference import plan_jobs, run_inference
    from aggfov.training.checkpoint import load_checkpoint

    with command_errors():
        jobs = plan_jobs(inputs, out_dir)
        net, _, step = load_checkpoint(checkpoint)
        written = run_inference(net, jobs)

    click.echo(f"Wrote {len(written)} images to {out_dir} (checkpoint step {step})")
