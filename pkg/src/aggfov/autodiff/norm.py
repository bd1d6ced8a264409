"""Per-channel batch normalization with running statistics."""

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from aggfov.autodiff.tensor import Function, Tensor
from aggfov.common.errors import ConfigError, ShapeError

Mode = Literal["train", "eval"]

BN_EPS = 1e-5
BN_MOMENTUM = 0.9

_AXES = (0, 2, 3)


@dataclass
class RunningStats:
    """Running mean and (biased) variance of one normalization layer.

    The arrays are swapped out, never written in place, so a replica can
    share them with the authoritative copy until its first update.
    """

    mean: Tensor
    var: Tensor
    momentum: float = BN_MOMENTUM
    eps: float = BN_EPS

    @classmethod
    def fresh(
        cls, channels: int, dtype: np.dtype = np.dtype(np.float32)
    ) -> "RunningStats":
        """Statistics of an untrained layer: mean 0, variance 1."""
        return cls(
            mean=Tensor(np.zeros(channels, dtype=dtype)),
            var=Tensor(np.ones(channels, dtype=dtype)),
        )

    def update(self, batch_mean: np.ndarray, batch_var: np.ndarray) -> None:
        """Blend batch statistics in with the configured momentum."""
        keep = self.mean.dtype.type(self.momentum)
        take = self.mean.dtype.type(1.0 - self.momentum)
        self.mean.data = (
            keep * self.mean.data + take * batch_mean.astype(self.mean.dtype)
        )
        self.var.data = keep * self.var.data + take * batch_var.astype(self.var.dtype)

    def copy(self) -> "RunningStats":
        """Independent copy for a worker replica."""
        return RunningStats(
            mean=Tensor(self.mean.data.copy()),
            var=Tensor(self.var.data.copy()),
            momentum=self.momentum,
            eps=self.eps,
        )


def _channel(v: np.ndarray) -> np.ndarray:
    return v.reshape(1, -1, 1, 1)


class BatchNorm(Function):
    def forward(
        self,
        x: np.ndarray,
        gamma: np.ndarray,
        beta: np.ndarray,
        *,
        stats: RunningStats,
        mode: Mode,
    ) -> np.ndarray:
        count = x.shape[0] * x.shape[2] * x.shape[3]
        if count == 0:
            raise ShapeError(f"batch_norm on an empty batch: shape {x.shape}")
        eps = x.dtype.type(stats.eps)
        if mode == "train":
            mean = x.mean(axis=_AXES)
            var = x.var(axis=_AXES)
            stats.update(mean, var)
        else:
            mean = stats.mean.data.astype(x.dtype)
            var = stats.var.data.astype(x.dtype)
        self.mode = mode
        self.count = count
        self.inv_std = _channel(1.0 / np.sqrt(var + eps))
        self.xhat = (x - _channel(mean)) * self.inv_std
        self.gamma = gamma
        return _channel(gamma) * self.xhat + _channel(beta)

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        dgamma = (grad * self.xhat).sum(axis=_AXES) if self.needs_grad(1) else None
        dbeta = grad.sum(axis=_AXES) if self.needs_grad(2) else None
        dx = None
        if self.needs_grad(0):
            dxhat = grad * _channel(self.gamma)
            if self.mode == "eval":
                dx = dxhat * self.inv_std
            else:
                m = self.count
                dx = (self.inv_std / m) * (
                    m * dxhat
                    - dxhat.sum(axis=_AXES, keepdims=True)
                    - self.xhat * (dxhat * self.xhat).sum(axis=_AXES, keepdims=True)
                )
        return dx, dgamma, dbeta


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    stats: RunningStats,
    mode: Mode = "train",
) -> Tensor:
    """Normalize each channel and apply the affine ``gamma * xhat + beta``.

    Train mode uses the batch mean and biased variance over (N, H, W) and
    folds them into ``stats``; eval mode reads ``stats`` only.

    Raises:
        ShapeError: Non 4-D input, channel count mismatch or empty batch
        ConfigError: Unknown mode
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"batch_norm mode must be 'train' or 'eval', got {mode!r}")
    if x.ndim != 4:
        raise ShapeError(f"batch_norm needs a 4-D input, got shape {x.shape}")
    channels = x.shape[1]
    for label, t in (
        ("gamma", gamma),
        ("beta", beta),
        ("running mean", stats.mean),
        ("running var", stats.var),
    ):
        if t.shape != (channels,):
            raise ShapeError(
                f"batch_norm: {label} has shape {t.shape}, "
                f"input has {channels} channels"
            )
    return BatchNorm.apply(x, gamma, beta, stats=stats, mode=mode)
