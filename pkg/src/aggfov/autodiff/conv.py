"""Dilated convolution and transposed convolution with "same" zero padding.

The kernels loop over taps and contract the channel axis of each shifted
input window with one tap of the weight (a BLAS matmul per tap). With
``threads > 1`` the work is split over output-channel blocks; a fixed thread
count always produces the same blocks and so the same bits.

Geometry: ``pad = dilation * (k - 1) // 2`` per side and
``H' = ceil(H / stride)``, so ``output[n, co, y, x]`` reads padded input
rows ``y * stride + dy * dilation``.
"""

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import numpy as np

from aggfov.autodiff.tensor import Function, Tensor
from aggfov.common.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)

_num_threads = 1
_executor: Optional[ThreadPoolExecutor] = None
_executor_lock = threading.Lock()


def set_num_threads(threads: int) -> None:
    """Cap intra-op parallelism (1 = single-threaded, bitwise reproducible)."""
    global _num_threads, _executor
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    with _executor_lock:
        if _executor is not None:
            _executor.shutdown(wait=True)
            _executor = None
        _num_threads = threads
    logger.debug("Convolution threads set to %d", threads)


def get_num_threads() -> int:
    """Current intra-op thread cap."""
    return _num_threads


def _run_blocks(total: int, work: Callable[[slice], None]) -> None:
    """Call ``work`` on contiguous channel blocks, possibly in parallel."""
    global _executor
    blocks = min(_num_threads, total)
    if blocks <= 1:
        work(slice(0, total))
        return
    edges = np.linspace(0, total, blocks + 1).astype(int)
    chunks = [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]
    with _executor_lock:
        if _executor is None:
            _executor = ThreadPoolExecutor(
                max_workers=_num_threads, thread_name_prefix="aggfov-conv"
            )
        executor = _executor
    for future in [executor.submit(work, chunk) for chunk in chunks]:
        future.result()


def effective_extent(kernel: int, dilation: int) -> int:
    """Spatial footprint of a dilated kernel."""
    return dilation * (kernel - 1) + 1


def same_padding(kernel: int, dilation: int) -> int:
    """Per-side zero padding that preserves size at stride 1."""
    return dilation * (kernel - 1) // 2


def output_size(size: int, stride: int) -> int:
    """Output extent of a same-padded convolution."""
    return math.ceil(size / stride)


def _check_geometry(kernel_shape: tuple[int, ...], stride: int, dilation: int) -> int:
    if len(kernel_shape) != 4:
        raise ShapeError(f"weight must be 4-D, got shape {kernel_shape}")
    k, k2 = kernel_shape[2], kernel_shape[3]
    if k != k2:
        raise ConfigError(f"kernels must be square, got {k}x{k2}")
    if k % 2 == 0:
        raise ConfigError(f"kernel size must be odd, got {k}")
    if stride < 1 or dilation < 1:
        raise ConfigError(
            f"stride and dilation must be positive, got {stride}, {dilation}"
        )
    return k


def _tap(dy: int, dx: int, dilation: int, stride: int, ho: int, wo: int) -> tuple:
    y0, x0 = dy * dilation, dx * dilation
    return (
        slice(None),
        slice(None),
        slice(y0, y0 + (ho - 1) * stride + 1, stride),
        slice(x0, x0 + (wo - 1) * stride + 1, stride),
    )


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def conv2d_array(
    x: np.ndarray,
    weight: np.ndarray,
    bias: Optional[np.ndarray],
    stride: int = 1,
    dilation: int = 1,
) -> np.ndarray:
    """Forward convolution on raw arrays; weight is (Cout, Cin, k, k)."""
    k = _check_geometry(weight.shape, stride, dilation)
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be 4-D, got shape {x.shape}")
    n, cin, h, w = x.shape
    cout = weight.shape[0]
    if weight.shape[1] != cin:
        raise ShapeError(
            f"conv2d: input has {cin} channels but weight expects {weight.shape[1]}"
        )
    pad = same_padding(k, dilation)
    ho, wo = output_size(h, stride), output_size(w, stride)
    xp = _pad(x, pad)
    dtype = np.result_type(x, weight)
    out = np.empty((cout, n, ho, wo), dtype=dtype)

    def work(block: slice) -> None:
        acc = np.zeros((block.stop - block.start, n, ho, wo), dtype=dtype)
        for dy in range(k):
            for dx in range(k):
                window = xp[_tap(dy, dx, dilation, stride, ho, wo)]
                acc += np.tensordot(weight[block, :, dy, dx], window, axes=([1], [1]))
        if bias is not None:
            acc += bias[block].reshape(-1, 1, 1, 1)
        out[block] = acc

    _run_blocks(cout, work)
    return np.ascontiguousarray(out.transpose(1, 0, 2, 3))


def conv2d_input_grad(
    grad: np.ndarray,
    weight: np.ndarray,
    input_shape: tuple[int, ...],
    stride: int = 1,
    dilation: int = 1,
) -> np.ndarray:
    """Adjoint of ``conv2d_array`` with respect to its input."""
    k = _check_geometry(weight.shape, stride, dilation)
    n, cin, h, w = input_shape
    cout = weight.shape[0]
    ho, wo = output_size(h, stride), output_size(w, stride)
    if grad.shape != (n, cout, ho, wo):
        raise ShapeError(
            f"gradient shape {grad.shape} does not match expected {(n, cout, ho, wo)}"
        )
    pad = same_padding(k, dilation)
    dtype = np.result_type(grad, weight)
    # (Cin, N, Hp, Wp) so that each tap contributes one tensordot result
    dxp = np.zeros((cin, n, h + 2 * pad, w + 2 * pad), dtype=dtype)

    def work(block: slice) -> None:
        for dy in range(k):
            for dx in range(k):
                dxp[(block,) + _tap(dy, dx, dilation, stride, ho, wo)[1:]] += (
                    np.tensordot(weight[:, block, dy, dx], grad, axes=([0], [1]))
                )

    _run_blocks(cin, work)
    dx = dxp[:, :, pad : pad + h, pad : pad + w]
    return np.ascontiguousarray(dx.transpose(1, 0, 2, 3))


def conv2d_weight_grad(
    grad: np.ndarray,
    x: np.ndarray,
    weight_shape: tuple[int, ...],
    stride: int = 1,
    dilation: int = 1,
) -> np.ndarray:
    """Gradient of ``conv2d_array`` with respect to its weight."""
    k = _check_geometry(weight_shape, stride, dilation)
    cout = weight_shape[0]
    ho, wo = grad.shape[2], grad.shape[3]
    xp = _pad(x, same_padding(k, dilation))
    dw = np.zeros(weight_shape, dtype=np.result_type(grad, x))

    def work(block: slice) -> None:
        g = grad[:, block]
        for dy in range(k):
            for dx in range(k):
                window = xp[_tap(dy, dx, dilation, stride, ho, wo)]
                dw[block, :, dy, dx] = np.tensordot(
                    g, window, axes=([0, 2, 3], [0, 2, 3])
                )

    _run_blocks(cout, work)
    return dw


def conv2d_transpose_array(
    x: np.ndarray,
    weight: np.ndarray,
    bias: Optional[np.ndarray],
    stride: int = 1,
    dilation: int = 1,
) -> np.ndarray:
    """Transposed convolution; weight is (Cin, Cout, k, k).

    The result is the adjoint of ``conv2d_array`` with the same weight and
    geometry applied to a (N, Cout, stride*H, stride*W) input.
    """
    _check_geometry(weight.shape, stride, dilation)
    if x.ndim != 4:
        raise ShapeError(f"conv2d_transpose input must be 4-D, got shape {x.shape}")
    n, cin, h, w = x.shape
    if weight.shape[0] != cin:
        raise ShapeError(
            f"conv2d_transpose: input has {cin} channels "
            f"but weight expects {weight.shape[0]}"
        )
    cout = weight.shape[1]
    out = conv2d_input_grad(
        x, weight, (n, cout, stride * h, stride * w), stride, dilation
    )
    if bias is not None:
        out += bias.reshape(1, -1, 1, 1)
    return out


class Conv2d(Function):
    def forward(
        self,
        x: np.ndarray,
        weight: np.ndarray,
        bias: np.ndarray,
        *,
        stride: int,
        dilation: int,
    ) -> np.ndarray:
        self.x, self.weight = x, weight
        self.stride, self.dilation = stride, dilation
        return conv2d_array(x, weight, bias, stride, dilation)

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        dx = dw = db = None
        if self.needs_grad(0):
            dx = conv2d_input_grad(
                grad, self.weight, self.x.shape, self.stride, self.dilation
            )
        if self.needs_grad(1):
            dw = conv2d_weight_grad(
                grad, self.x, self.weight.shape, self.stride, self.dilation
            )
        if self.needs_grad(2):
            db = grad.sum(axis=(0, 2, 3))
        return dx, dw, db


class Conv2dTranspose(Function):
    def forward(
        self,
        x: np.ndarray,
        weight: np.ndarray,
        bias: np.ndarray,
        *,
        stride: int,
        dilation: int,
    ) -> np.ndarray:
        self.x, self.weight = x, weight
        self.stride, self.dilation = stride, dilation
        return conv2d_transpose_array(x, weight, bias, stride, dilation)

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        dx = dw = db = None
        if self.needs_grad(0):
            dx = conv2d_array(grad, self.weight, None, self.stride, self.dilation)
        if self.needs_grad(1):
            # roles swap: x plays the conv output gradient, grad the conv input
            dw = conv2d_weight_grad(
                self.x, grad, self.weight.shape, self.stride, self.dilation
            )
        if self.needs_grad(2):
            db = grad.sum(axis=(0, 2, 3))
        return dx, dw, db


def _check_bias(bias: Tensor, channels: int) -> None:
    if bias.shape != (channels,):
        raise ShapeError(f"bias must have shape ({channels},), got {bias.shape}")


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor,
    stride: int = 1,
    dilation: int = 1,
) -> Tensor:
    """Same-padded dilated convolution.

    Args:
        x: Input of shape (N, Cin, H, W)
        weight: Kernel of shape (Cout, Cin, k, k) with k odd
        bias: Per-output-channel bias of shape (Cout,)
        stride: Positive subsampling factor
        dilation: Positive tap spacing

    Returns:
        Tensor of shape (N, Cout, ceil(H/stride), ceil(W/stride))

    Raises:
        ShapeError: Channel mismatch
        ConfigError: Even kernel or non-positive stride/dilation
    """
    _check_bias(bias, weight.shape[0])
    return Conv2d.apply(x, weight, bias, stride=stride, dilation=dilation)


def conv2d_transpose(
    x: Tensor,
    weight: Tensor,
    bias: Tensor,
    stride: int = 1,
    dilation: int = 1,
) -> Tensor:
    """Learned upsampling: the adjoint of ``conv2d`` with the same geometry.

    Args:
        x: Input of shape (N, Cin, H, W)
        weight: Kernel of shape (Cin, Cout, k, k) with k odd
        bias: Per-output-channel bias of shape (Cout,)
        stride: Upsampling factor

    Returns:
        Tensor of shape (N, Cout, stride*H, stride*W)
    """
    _check_bias(bias, weight.shape[1])
    return Conv2dTranspose.apply(x, weight, bias, stride=stride, dilation=dilation)
