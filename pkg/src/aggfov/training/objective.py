"""Hallucination loss (RMSE plus edge-aware smoothness) and the pixel metric."""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from aggfov.autodiff.ops import exp, reduce_mean, scalar_mul, sqrt_, square
from aggfov.autodiff.tensor import Function, Tensor
from aggfov.common.config import LossConfig
from aggfov.common.errors import ConfigError, DatasetError, ShapeError

RMSE_EPS = 1e-12


class Huber(Function):
    def forward(self, x: np.ndarray, *, delta: float) -> np.ndarray:
        d = x.dtype.type(delta)
        self.x = x
        self.delta = d
        self.inside = np.abs(x) <= d
        return np.where(self.inside, 0.5 * x * x, d * (np.abs(x) - 0.5 * d))

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        slope = np.where(self.inside, self.x, self.delta * np.sign(self.x))
        return (grad * slope,)


class ImageGradient(Function):
    def forward(self, img: np.ndarray) -> np.ndarray:
        gx = np.zeros_like(img)
        gy = np.zeros_like(img)
        gx[:, :, :, :-1] = img[:, :, :, 1:] - img[:, :, :, :-1]
        gy[:, :, :-1, :] = img[:, :, 1:, :] - img[:, :, :-1, :]
        self.channels = img.shape[1]
        return np.concatenate([gx, gy], axis=1)

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        c = self.channels
        gx, gy = grad[:, :c], grad[:, c:]
        dimg = np.zeros_like(gx)
        dimg[:, :, :, 1:] += gx[:, :, :, :-1]
        dimg[:, :, :, :-1] -= gx[:, :, :, :-1]
        dimg[:, :, 1:, :] += gy[:, :, :-1, :]
        dimg[:, :, :-1, :] -= gy[:, :, :-1, :]
        return (dimg,)


def huber(x: Tensor, delta: float) -> Tensor:
    """Elementwise Huber penalty: quadratic up to ``delta``, linear beyond.

    Raises:
        ConfigError: ``delta <= 0``
    """
    if delta <= 0:
        raise ConfigError(f"Huber delta must be positive, got {delta}")
    return Huber.apply(x, delta=delta)


def image_gradient(img: Tensor) -> Tensor:
    """Forward differences, x then y, stacked on the channel axis.

    The last column of ``gx`` and the last row of ``gy`` are zero.
    """
    if img.ndim != 4:
        raise ShapeError(f"image_gradient needs a 4-D tensor, got {img.shape}")
    return ImageGradient.apply(img)


def _check_same(hal: Tensor, gt: Tensor, what: str) -> None:
    if hal.shape != gt.shape:
        raise ShapeError(f"{what}: prediction {hal.shape} vs target {gt.shape}")
    if hal.ndim != 4:
        raise ShapeError(f"{what} needs 4-D tensors, got {hal.shape}")


def rmse_loss(hal: Tensor, gt: Tensor) -> Tensor:
    """Per-image root mean squared error, averaged over the batch."""
    _check_same(hal, gt, "rmse_loss")
    per_image = reduce_mean(square(hal - gt), over="sample")
    return reduce_mean(sqrt_(per_image + RMSE_EPS))


def smoothness_loss(hal: Tensor, gt: Tensor, cfg: LossConfig) -> Tensor:
    """Mean of ``huber(grad hal) * exp(-huber(grad gt))`` over the batch.

    The target weight is a constant: no gradient flows into ``gt``.
    """
    _check_same(hal, gt, "smoothness_loss")
    target = Tensor(gt.data)
    weight = exp(-huber(image_gradient(target), cfg.delta))
    return reduce_mean(huber(image_gradient(hal), cfg.delta) * weight)


@dataclass
class LossTerms:
    """Total loss with its two components."""

    total: Tensor
    rmse: Tensor
    smooth: Tensor


def loss_terms(hal: Tensor, gt: Tensor, cfg: LossConfig) -> LossTerms:
    """Compute both loss components and their weighted sum."""
    rmse = rmse_loss(hal, gt)
    smooth = smoothness_loss(hal, gt, cfg)
    if cfg.lambda_ == 0:
        return LossTerms(total=rmse, rmse=rmse, smooth=smooth)
    total = rmse + scalar_mul(smooth, cfg.lambda_)
    return LossTerms(total=total, rmse=rmse, smooth=smooth)


def total_loss(hal: Tensor, gt: Tensor, cfg: LossConfig) -> Tensor:
    """``rmse + lambda * smoothness``."""
    return loss_terms(hal, gt, cfg).total


def mean_abs_pixel_diff(
    hal_set: Sequence[np.ndarray], gt_set: Sequence[np.ndarray]
) -> float:
    """Mean |p - q| over every image, pixel and channel (0-255 RGB scale).

    Raises:
        DatasetError: Empty or unequal collections
        ShapeError: A pair with different shapes
    """
    if len(hal_set) != len(gt_set):
        raise DatasetError(
            f"image sets differ in length: {len(hal_set)} vs {len(gt_set)}"
        )
    if not hal_set:
        raise DatasetError("cannot compute pixel difference of an empty set")
    total = 0.0
    count = 0
    for hal, gt in zip(hal_set, gt_set):
        a = np.asarray(hal, dtype=np.float64)
        b = np.asarray(gt, dtype=np.float64)
        if a.shape != b.shape:
            raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
        total += float(np.abs(a - b).sum())
        count += a.size
    return total / count
