"""CLI for the training component."""

import sys
from typing import Optional

import click

from aggfov.common.cli import apply_settings, command_errors


@click.command("train")
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Flat 'key = value' config file; flags override it",
)
@click.option("--manifest", type=str, default=None, help="Dataset manifest")
@click.option("--run-dir", type=str, default=None, help="Output directory")
@click.option("--seed", type=int, default=None, help="Init, split and sampling seed")
@click.option("--split-ratio", type=float, default=None, help="Training share")
@click.option("--steps", type=int, default=None, help="Optimizer steps")
@click.option("--epochs", type=int, default=None, help="Epoch budget")
@click.option("--workers", type=int, default=None, help="Data-parallel workers")
@click.option(
    "--batch-per-worker", type=int, default=None, help="Images per worker shard"
)
@click.option(
    "--accumulate", type=int, default=None, help="Sequential shards per worker"
)
@click.option("--lr", type=float, default=None, help="Adam learning rate")
@click.option(
    "--lambda", "lambda_", type=float, default=None, help="Smoothness weight"
)
@click.option("--delta", type=float, default=None, help="Huber threshold")
@click.option(
    "--checkpoint-interval",
    type=int,
    default=None,
    help="Steps between checkpoints (0 = final only)",
)
@click.option("--log-interval", type=int, default=None, help="Steps between logs")
@click.option(
    "--resume",
    type=str,
    default=None,
    help="Continue from a checkpoint (weights, optimizer state, step)",
)
@click.option(
    "--init-from",
    type=str,
    default=None,
    help="Fine-tune from a checkpoint's weights",
)
def train(config_path: Optional[str], **flags: object) -> None:
    """Train the hallucination network on a manifest.

    Writes config.resolved, loss.csv, metrics.prom, train.log and
    checkpoint.agfv to the run directory.
    """
    from aggfov.common.config import resolve_run_config, write_resolved_config
    from aggfov.common.errors import ConfigError
    from aggfov.common.logging import run_log
    from aggfov.data.dataset import DatasetManifest, load_pairs, split
    from aggfov.model.network import build_network
    from aggfov.training.checkpoint import load_checkpoint
    from aggfov.training.trainer import train as run_training

    with command_errors():
        config = resolve_run_config(config_path, flags)
        if config.manifest is None:
            raise ConfigError("no manifest given (--manifest or 'manifest' key)")
        apply_settings(config)
        write_resolved_config(config)

        manifest = DatasetManifest.read(config.manifest)
        train_split, _ = split(manifest, config.split_ratio, config.seed)
        pairs = load_pairs(train_split)
        train_config = config.train_config()

        net = build_network(seed=config.seed)
        state = None
        start_step = 0
        if config.resume:
            net, state, start_step = load_checkpoint(
                config.resume, net, train_config.optimizer
            )
        elif config.init_from:
            net, _, _ = load_checkpoint(config.init_from, net)

        with run_log(config.run_path):
            result = run_training(
                net, pairs, train_config, state, start_step, run_dir=config.run_path
            )

    final = f", final loss {result.history[-1][1]:.6f}" if result.history else ""
    click.echo(f"Trained to step {result.step}{final}; run directory {config.run_dir}")


@click.command("eval")
@click.option(
    "--checkpoint",
    type=click.Path(dir_okay=False),
    required=True,
    help="Trained checkpoint",
)
@click.option("--manifest", type=str, required=True, help="Dataset manifest")
@click.option(
    "--split-ratio",
    type=float,
    default=None,
    help="Evaluate the held-out part of this train/test split",
)
@click.option("--seed", type=int, default=0, show_default=True, help="Split seed")
@click.option(
    "--train-manifest",
    type=str,
    default=None,
    help="Training set for the mean-image baseline",
)
@click.option("--batch-size", type=int, default=1, show_default=True)
@click.option(
    "--out",
    "out_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Report path (default: report.json next to the checkpoint)",
)
def evaluate_command(
    checkpoint: str,
    manifest: str,
    split_ratio: Optional[float],
    seed: int,
    train_manifest: Optional[str],
    batch_size: int,
    out_path: Optional[str],
) -> None:
    """Report per-image and aggregate MAPD of a checkpoint.

    Without --split-ratio every manifest entry is evaluated. The mean-image
    baseline uses --train-manifest, else the training part of the split.
    """
    from pathlib import Path

    from aggfov.common.errors import ConfigError
    from aggfov.common.logging import run_log
    from aggfov.data.dataset import DatasetManifest, load_pairs, split
    from aggfov.training.checkpoint import load_checkpoint
    from aggfov.training.evaluate import REPORT_NAME, evaluate

    with command_errors():
        if batch_size < 1:
            raise ConfigError(f"batch size must be positive, got {batch_size}")
        test_manifest = DatasetManifest.read(manifest)
        train_part = None
        if split_ratio is not None:
            train_part, test_manifest = split(test_manifest, split_ratio, seed)
        if train_manifest is not None:
            train_part = DatasetManifest.read(train_manifest)

        pairs = load_pairs(test_manifest)
        train_pairs = load_pairs(train_part) if train_part else None
        net, _, _ = load_checkpoint(checkpoint)
        report = evaluate(net, pairs, train_pairs, batch_size=batch_size)
        path = report.write(out_path or Path(checkpoint).parent / REPORT_NAME)

    click.echo(f"MAPD {report.mapd:.4f} over {len(report.per_image)} images")
    for name, score in report.baselines.items():
        click.echo(f"  baseline {name}: {score:.4f}")
    click.echo(f"Report written to {path}")


@click.command("gradcheck")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--step", "h", type=float, default=1e-6, show_default=True, help="Difference step"
)
def gradcheck(seed: int, h: float) -> None:
    """Finite-difference check of every primitive and the full loss.

    Exits with status 1 when any check fails.
    """
    from aggfov.training.selfcheck import run_suite

    with command_errors():
        results = run_suite(seed=seed, h=h)

    width = max(len(r.name) for r in results)
    for r in results:
        status = "ok" if r.passed else "FAIL"
        click.echo(
            f"{r.name:<{width}}  {r.max_error:.3e}  (tol {r.tolerance:.0e})  {status}"
        )
    failed = [r.name for r in results if not r.passed]
    if failed:
        click.echo(f"{len(failed)} of {len(results)} checks failed", err=True)
        sys.exit(1)
    click.echo(f"All {len(results)} checks passed")
