"""Prometheus textfile export and CSV loss history for training runs."""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from prometheus_client import CollectorRegistry, Gauge, write_to_textfile

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.prom"
LOSS_FILE = "loss.csv"


@dataclass(frozen=True)
class StepMetrics:
    """Numbers reported after one optimizer step."""

    step: int
    loss: float
    rmse: float
    smooth: float
    seconds: float
    images: int


def collect_metrics(
    metrics: StepMetrics, total_steps: int, workers: int
) -> CollectorRegistry:
    """Build a fresh registry holding the gauges of one training step.

    Creates a fresh CollectorRegistry per call to avoid global state issues.
    """
    from aggfov import __version__

    registry = CollectorRegistry()

    info = Gauge("aggfov_info", "aggfov version", ["version"], registry=registry)
    info.labels(version=__version__).set(1)

    Gauge("aggfov_train_step", "Last completed optimizer step", registry=registry).set(
        metrics.step
    )
    Gauge("aggfov_train_steps_total", "Planned optimizer steps", registry=registry).set(
        total_steps
    )
    Gauge("aggfov_train_workers", "Data-parallel workers", registry=registry).set(
        workers
    )

    loss = Gauge(
        "aggfov_train_loss",
        "Global-batch loss of the last step",
        ["term"],
        registry=registry,
    )
    loss.labels(term="total").set(metrics.loss)
    loss.labels(term="rmse").set(metrics.rmse)
    loss.labels(term="smooth").set(metrics.smooth)

    Gauge(
        "aggfov_train_step_seconds", "Wall time of the last step", registry=registry
    ).set(metrics.seconds)
    Gauge(
        "aggfov_train_images_per_second",
        "Training throughput of the last step",
        registry=registry,
    ).set(metrics.images / metrics.seconds if metrics.seconds > 0 else 0.0)
    return registry


def write_metrics(
    run_dir: Path, metrics: StepMetrics, total_steps: int, workers: int
) -> Path:
    """Write ``metrics.prom`` for a node-exporter textfile collector."""
    path = run_dir / METRICS_FILE
    write_to_textfile(str(path), collect_metrics(metrics, total_steps, workers))
    return path


def read_loss_history(path: Path) -> list[tuple[int, float]]:
    """Parse a loss CSV into ``(step, loss)`` tuples."""
    with path.open(newline="", encoding="utf-8") as f:
        return [(int(row["step"]), float(row["loss"])) for row in csv.DictReader(f)]


class LossHistory:
    """Appends ``step,loss`` rows to the run's CSV file.

    A resumed run keeps the rows up to ``resume_step`` and continues after
    them; otherwise the file starts over.
    """

    def __init__(self, run_dir: Path, resume_step: Optional[int] = None):
        self.path = run_dir / LOSS_FILE
        run_dir.mkdir(parents=True, exist_ok=True)
        kept: list[tuple[int, float]] = []
        if resume_step is not None and self.path.is_file():
            kept = [
                row for row in read_loss_history(self.path) if row[0] <= resume_step
            ]
        with self.path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "loss"])
            writer.writerows([step, repr(loss)] for step, loss in kept)

    def append(self, step: int, loss: float) -> None:
        """Record one step."""
        with self.path.open("a", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow([step, repr(float(loss))])
