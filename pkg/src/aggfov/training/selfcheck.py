"""Finite-difference gradient suite over every primitive and the full loss.

All checks run in 64-bit on small random inputs. Tensor-valued ops are
reduced to a scalar by a fixed random projection so every output coordinate
contributes to the checked gradient. The suite ends with a self-test that
plants a sign error in a backward rule and expects the harness to catch it.
"""

import logging
import time
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from aggfov.autodiff import ops
from aggfov.autodiff.conv import conv2d, conv2d_transpose
from aggfov.autodiff.gradcheck import check_gradient
from aggfov.autodiff.norm import RunningStats, batch_norm
from aggfov.autodiff.tensor import Tensor
from aggfov.common.config import LossConfig
from aggfov.model.blocks import (
    DecoderBlockSpec,
    EncoderBlockSpec,
    decoder_block_forward,
    encoder_block_forward,
)
from aggfov.model.params import initialize
from aggfov.training.objective import (
    huber,
    image_gradient,
    rmse_loss,
    smoothness_loss,
    total_loss,
)

logger = logging.getLogger(__name__)

PRIMITIVE_TOLERANCE = 1e-6
COMPOSITE_TOLERANCE = 1e-5

F64 = np.float64


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one gradient check."""

    name: str
    max_error: float
    tolerance: float
    seconds: float = 0.0
    expect_failure: bool = False

    @property
    def passed(self) -> bool:
        """Whether the check behaved as expected."""
        caught = self.max_error >= self.tolerance
        return caught if self.expect_failure else not caught

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        return {
            "name": self.name,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "seconds": self.seconds,
        }


class _Projector:
    """Scalarize tensors with a fixed random weight per output shape."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.weights: dict[tuple[int, ...], Tensor] = {}

    def __call__(self, out: Tensor) -> Tensor:
        if out.ndim == 0:
            return out
        if out.shape not in self.weights:
            weight = self.rng.standard_normal(out.shape)
            self.weights[out.shape] = Tensor(weight, dtype=F64)
        return ops.reduce_sum(out * self.weights[out.shape])


class _SignFlippedRelu(ops.Relu):
    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        (dx,) = super().backward(grad)
        return (-dx,)


@dataclass(frozen=True)
class _Check:
    name: str
    f: Callable[[Tensor], Tensor]
    x: np.ndarray
    tolerance: float = PRIMITIVE_TOLERANCE
    max_coords: Optional[int] = None
    step: Optional[float] = None
    expect_failure: bool = False


def _const(rng: np.random.Generator, *shape: int) -> Tensor:
    return Tensor(rng.standard_normal(shape), dtype=F64)


def _away_from_zero(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(0.2, 1.5, size=shape)


def _checks(seed: int) -> list[_Check]:
    rng = np.random.default_rng(seed)
    p = _Projector(seed + 1)
    shape = (2, 3, 4, 5)
    other = _const(rng, *shape)
    cfg = LossConfig(lambda_=50.0, delta=0.001)

    w3 = _const(rng, 4, 3, 3, 3)
    b4 = _const(rng, 4)
    wt = _const(rng, 3, 2, 3, 3)
    b2 = _const(rng, 2)
    gamma = Tensor(rng.uniform(0.5, 1.5, 3), dtype=F64)
    beta = _const(rng, 3)
    gt = Tensor(rng.uniform(0, 1, (1, 3, 8, 8)), dtype=F64)
    x_conv = rng.standard_normal((1, 3, 6, 7))

    def normal() -> np.ndarray:
        return rng.standard_normal(shape)

    def image() -> np.ndarray:
        return rng.uniform(0, 1, (1, 3, 8, 8))

    def fresh_stats() -> RunningStats:
        return RunningStats.fresh(3, F64)

    x_fixed = Tensor(x_conv, dtype=F64)
    other_fixed = Tensor(other.data, dtype=F64)

    checks = [
        _Check("add", lambda x: p(ops.add(x, other)), normal()),
        _Check("sub", lambda x: p(ops.sub(other, x)), normal()),
        _Check("mul", lambda x: p(ops.mul(x, x)), normal()),
        _Check("scalar_mul", lambda x: p(ops.scalar_mul(x, -2.5)), normal()),
        _Check("relu", lambda x: p(ops.relu(x)), _away_from_zero(rng, *shape)),
        _Check("exp", lambda x: p(ops.exp(x)), normal()),
        _Check("abs", lambda x: p(ops.abs_(x)), _away_from_zero(rng, *shape)),
        _Check("sqrt", lambda x: p(ops.sqrt_(x)), rng.uniform(0.5, 2.0, shape)),
        _Check("square", lambda x: p(ops.square(x)), normal()),
        _Check("reduce_sum", lambda x: p(ops.reduce_sum(x, "spatial")), normal()),
        _Check("reduce_mean", lambda x: p(ops.reduce_mean(x, "sample")), normal()),
        _Check(
            "concat_channels",
            lambda x: p(ops.concat_channels([x, other, x])),
            normal(),
        ),
        _Check(
            "conv2d.input",
            lambda x: p(conv2d(x, w3, b4, stride=1, dilation=2)),
            x_conv,
        ),
        _Check(
            "conv2d.weight",
            lambda w: p(conv2d(x_fixed, w, b4, stride=2, dilation=1)),
            w3.data,
        ),
        _Check(
            "conv2d.bias",
            lambda b: p(conv2d(x_fixed, w3, b, stride=2)),
            b4.data,
        ),
        _Check(
            "conv2d_transpose.input",
            lambda x: p(conv2d_transpose(x, wt, b2, stride=2)),
            rng.standard_normal((2, 3, 3, 4)),
        ),
        _Check(
            "conv2d_transpose.weight",
            lambda w: p(conv2d_transpose(x_fixed, w, b2, stride=2, dilation=2)),
            wt.data,
        ),
        _Check(
            "batch_norm.train",
            lambda x: p(batch_norm(x, gamma, beta, fresh_stats(), "train")),
            normal(),
        ),
        _Check(
            "batch_norm.gamma",
            lambda g: p(batch_norm(other_fixed, g, beta, fresh_stats())),
            gamma.data,
        ),
        _Check(
            "batch_norm.eval",
            lambda x: p(batch_norm(x, gamma, beta, fresh_stats(), "eval")),
            normal(),
        ),
        _Check("huber", lambda x: p(huber(x, 0.5)), _away_from_zero(rng, *shape)),
        _Check("image_gradient", lambda x: p(image_gradient(x)), normal()),
        _Check("rmse_loss", lambda h: rmse_loss(h, gt), image()),
        _Check("smoothness_loss", lambda h: smoothness_loss(h, gt, cfg), image()),
        _Check("total_loss", lambda h: total_loss(h, gt, cfg), image()),
        _composite_check(seed),
        _Check(
            "harness.sign_flip_caught",
            lambda x: p(_SignFlippedRelu.apply(x)),
            _away_from_zero(rng, *shape),
            expect_failure=True,
        ),
    ]
    return checks


def _composite_check(seed: int) -> _Check:
    """Total loss through one encoder block and one decoder block."""
    rng = np.random.default_rng(seed + 2)
    enc = EncoderBlockSpec(in_channels=1, filters=6)
    dec = DecoderBlockSpec(in_channels=6, filters=3)
    params = initialize(
        [s.prefixed("enc") for s in enc.parameters()]
        + [s.prefixed("dec") for s in dec.parameters()],
        [(f"enc.{n}", c) for n, c in enc.norm_layers()]
        + [(f"dec.{n}", c) for n, c in dec.norm_layers()],
        seed=seed,
        dtype=np.dtype(F64),
    )
    scope = params.scope()
    gt = Tensor(rng.uniform(0, 1, (1, 3, 16, 16)), dtype=F64)
    cfg = LossConfig()

    def f(x: Tensor) -> Tensor:
        out, _ = encoder_block_forward(enc, scope.child("enc"), x, "train")
        hal = decoder_block_forward(dec, scope.child("dec"), out, "train")
        return total_loss(hal, gt, cfg)

    return _Check(
        "encoder_decoder.total_loss",
        f,
        rng.uniform(0, 1, (1, 1, 16, 16)),
        tolerance=COMPOSITE_TOLERANCE,
        max_coords=32,
        step=1e-7,
    )


def run_suite(seed: int = 0, h: float = 1e-6) -> list[CheckResult]:
    """Run every check and return one result per check."""
    results = []
    for check in _checks(seed):
        started = time.perf_counter()
        outcome = check_gradient(
            check.f, check.x, h=check.step or h, max_coords=check.max_coords, seed=seed
        )
        result = CheckResult(
            check.name,
            outcome.max_error,
            check.tolerance,
            seconds=time.perf_counter() - started,
            expect_failure=check.expect_failure,
        )
        logger.debug(
            "gradcheck %s: max error %.3e (%s)",
            result.name,
            result.max_error,
            "ok" if result.passed else "FAIL",
        )
        results.append(result)
    return results
