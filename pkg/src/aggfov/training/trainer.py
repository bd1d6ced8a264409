"""Data-parallel training loop.

One optimizer step consumes ``workers * accumulate`` shards of
``batch_per_worker`` images. Every shard runs forward and backward on its own
replica of the authoritative parameters (shared weight arrays, private
gradients and batch-norm statistics) with its own tape. Up to ``workers``
shards run concurrently; the coordinator then averages gradients and
running statistics in shard order and applies a single Adam step. Because
every shard starts from the same state and the reduction order is fixed,
the result does not depend on how shards are spread over workers.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from aggfov.autodiff.tensor import Tape, backward
from aggfov.common.config import TrainConfig
from aggfov.common.errors import ConfigError, DatasetError, NonFiniteError
from aggfov.common.logging import get_component_logger
from aggfov.data.dataset import ImagePair, make_batch
from aggfov.model.network import HallucinationNet, forward
from aggfov.training.checkpoint import save_checkpoint
from aggfov.training.metrics import LossHistory, StepMetrics, write_metrics
from aggfov.training.objective import loss_terms
from aggfov.training.optim import AdamState, adam_step

logger = get_component_logger("trainer")

CHECKPOINT_NAME = "checkpoint.agfv"


@dataclass
class ShardResult:
    """Gradients and statistics produced by one shard."""

    indices: list[int]
    loss: float
    rmse: float
    smooth: float
    grads: dict[str, np.ndarray]
    running: dict[str, tuple[np.ndarray, np.ndarray]]


@dataclass
class TrainResult:
    """Outcome of a training run."""

    net: HallucinationNet
    state: AdamState
    step: int
    history: list[tuple[int, float]] = field(default_factory=list)


def sample_stream(dataset_size: int, seed: int, start: int, count: int) -> list[int]:
    """Positions ``start .. start+count`` of the epoch-by-epoch sample order.

    Each epoch is an independent seeded permutation of the dataset, so a
    step's batch depends only on its position and a resumed run sees the
    same batches as an uninterrupted one.
    """
    if dataset_size <= 0:
        raise DatasetError("cannot sample from an empty dataset")
    out: list[int] = []
    position = start
    while len(out) < count:
        epoch, offset = divmod(position, dataset_size)
        order = np.random.default_rng([seed, epoch]).permutation(dataset_size)
        take = min(count - len(out), dataset_size - offset)
        out.extend(int(i) for i in order[offset : offset + take])
        position += take
    return out


def run_shard(
    net: HallucinationNet,
    pairs: Sequence[ImagePair],
    indices: list[int],
    config: TrainConfig,
    step: int,
) -> ShardResult:
    """Forward and backward of one shard on a private replica."""
    replica = net.params.replica()
    local = net.with_params(replica)
    with Tape():
        depth, target = make_batch(pairs, indices, dtype=replica.dtype)
        hal = forward(local, depth, mode="train")
        terms = loss_terms(hal, target, config.loss)
        loss = terms.total.item()
        if not np.isfinite(loss):
            ids = [pairs[i].id for i in indices]
            raise NonFiniteError(
                f"non-finite loss {loss} at step {step} for samples {ids}"
            )
        rmse, smooth = terms.rmse.item(), terms.smooth.item()
        backward(terms.total)

    grads = {
        name: (t.grad if t.grad is not None else np.zeros_like(t.data))
        for name, t in replica.params.items()
    }
    running = {
        name: (stats.mean.data, stats.var.data) for name, stats in replica.stats.items()
    }
    return ShardResult(indices, loss, rmse, smooth, grads, running)


def _average(arrays: list[np.ndarray]) -> np.ndarray:
    total = arrays[0].copy()
    for a in arrays[1:]:
        total += a
    return total * total.dtype.type(1.0 / len(arrays))


def reduce_shards(
    results: list[ShardResult],
) -> tuple[dict[str, np.ndarray], dict[str, tuple[np.ndarray, np.ndarray]]]:
    """Average gradients and running statistics in shard order."""
    grads = {
        name: _average([r.grads[name] for r in results]) for name in results[0].grads
    }
    running = {
        name: (
            _average([r.running[name][0] for r in results]),
            _average([r.running[name][1] for r in results]),
        )
        for name in results[0].running
    }
    return grads, running


class Trainer:
    """Runs optimizer steps over an in-memory dataset."""

    def __init__(
        self,
        net: HallucinationNet,
        pairs: Sequence[ImagePair],
        config: TrainConfig,
        state: Optional[AdamState] = None,
        start_step: int = 0,
        run_dir: Optional[Path] = None,
    ):
        if not pairs:
            raise DatasetError("training set is empty")
        self.net = net
        self.pairs = pairs
        self.config = config
        self.state = state or AdamState(config=config.optimizer)
        self.step = start_step
        self.run_dir = run_dir
        self.history: list[tuple[int, float]] = []
        self._loss_file: Optional[LossHistory] = None
        if run_dir is not None:
            resume_step = start_step if start_step else None
            self._loss_file = LossHistory(run_dir, resume_step=resume_step)

    @property
    def checkpoint_path(self) -> Optional[Path]:
        """Where checkpoints go, when the run has a directory."""
        return self.run_dir / CHECKPOINT_NAME if self.run_dir is not None else None

    def shards_for(self, step: int) -> list[list[int]]:
        """Sample indices of every shard of optimizer step ``step`` (1-based)."""
        cfg = self.config
        stream = sample_stream(
            len(self.pairs), cfg.seed, (step - 1) * cfg.global_batch, cfg.global_batch
        )
        per = cfg.batch_per_worker
        return [stream[i * per : (i + 1) * per] for i in range(cfg.shards_per_step)]

    def train_step(self) -> StepMetrics:
        """Run one optimizer step over all shards."""
        step = self.step + 1
        shards = self.shards_for(step)
        started = time.perf_counter()

        workers = min(self.config.workers, len(shards))
        if workers == 1:
            results = [
                run_shard(self.net, self.pairs, s, self.config, step) for s in shards
            ]
        else:
            with ThreadPoolExecutor(
                max_workers=workers, thread_name_prefix="aggfov-worker"
            ) as pool:
                futures = [
                    pool.submit(run_shard, self.net, self.pairs, s, self.config, step)
                    for s in shards
                ]
                results = [f.result() for f in futures]

        for i, r in enumerate(results):
            logger.debug(
                f"step {step} shard {i}: loss {r.loss:.6f}", step=step, shard=i
            )

        grads, running = reduce_shards(results)
        # barrier passed: no replica is alive, the authoritative set may change
        adam_step(self.net.params.params, grads, self.state)
        for name, (mean, var) in running.items():
            stats = self.net.params.running(name)
            stats.mean.data = mean
            stats.var.data = var

        self.step = step
        n = len(results)
        metrics = StepMetrics(
            step=step,
            loss=sum(r.loss for r in results) / n,
            rmse=sum(r.rmse for r in results) / n,
            smooth=sum(r.smooth for r in results) / n,
            seconds=time.perf_counter() - started,
            images=self.config.global_batch,
        )
        self.history.append((step, metrics.loss))
        if self._loss_file is not None:
            self._loss_file.append(step, metrics.loss)
        return metrics

    def save(self) -> Optional[Path]:
        """Checkpoint weights, optimizer state and step to the run directory."""
        if self.checkpoint_path is None:
            return None
        return save_checkpoint(
            self.net, self.state, self.checkpoint_path, step=self.step
        )

    def run(self, total_steps: Optional[int] = None) -> TrainResult:
        """Train until the step counter reaches the budget.

        The budget counts from step 0, so a resumed run finishes the plan it
        was started with.
        """
        cfg = self.config
        target = total_steps
        if target is None:
            target = cfg.total_steps(len(self.pairs))
        if target < 0:
            raise ConfigError(f"step budget must be non-negative, got {target}")
        logger.info(
            f"Training from step {self.step} to {target}: {len(self.pairs)} pairs, "
            f"{cfg.workers} workers x {cfg.accumulate} x "
            f"{cfg.batch_per_worker} images per step"
        )

        while self.step < target:
            try:
                metrics = self.train_step()
            except NonFiniteError as exc:
                logger.error(
                    f"step {self.step + 1} aborted: {exc}", step=self.step + 1
                )
                raise
            if self.run_dir is not None:
                write_metrics(self.run_dir, metrics, target, cfg.workers)
            if metrics.step % cfg.log_interval == 0 or metrics.step == target:
                logger.info(
                    f"step {metrics.step}/{target} loss {metrics.loss:.6f} "
                    f"(rmse {metrics.rmse:.6f}, smooth {metrics.smooth:.6f}) "
                    f"{metrics.seconds:.2f}s",
                    step=metrics.step,
                    loss=metrics.loss,
                )
            if cfg.checkpoint_interval and metrics.step % cfg.checkpoint_interval == 0:
                self.save()

        if self.run_dir is not None and (
            not cfg.checkpoint_interval or self.step % cfg.checkpoint_interval
        ):
            self.save()
        return TrainResult(self.net, self.state, self.step, list(self.history))


def train(
    net: HallucinationNet,
    pairs: Sequence[ImagePair],
    config: TrainConfig,
    state: Optional[AdamState] = None,
    start_step: int = 0,
    run_dir: Optional[Path] = None,
) -> TrainResult:
    """Train ``net`` in place; see :class:`Trainer`."""
    return Trainer(net, pairs, config, state, start_step, run_dir).run()
