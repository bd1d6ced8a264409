"""Elementwise, reduction and concatenation primitives.

Broadcasting is limited to scalar-with-tensor: two tensor operands must have
identical shapes unless one of them is 0-d. ReLU and abs use subgradient 0 at
the origin.
"""

from typing import Literal, Optional, Sequence, Union

import numpy as np

from aggfov.autodiff.tensor import Function, Scalar, Tensor
from aggfov.common.errors import ShapeError

ReduceOver = Literal["all", "spatial", "sample"]

_REDUCE_AXES: dict[str, tuple[int, ...]] = {
    "spatial": (2, 3),
    "sample": (1, 2, 3),
}


def _check_pair(a: np.ndarray, b: np.ndarray, op: str) -> None:
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum(), dtype=grad.dtype).reshape(shape)


class Add(Function):
    """a + b; a 0-d operand broadcasts."""

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _check_pair(a, b, "add")
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        return (
            _unbroadcast(grad, self.shapes[0]),
            _unbroadcast(grad, self.shapes[1]),
        )


class Sub(Function):
    """a - b; a 0-d operand broadcasts."""

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _check_pair(a, b, "sub")
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        return (
            _unbroadcast(grad, self.shapes[0]),
            _unbroadcast(-grad, self.shapes[1]),
        )


class Mul(Function):
    """a * b, with gradients only for inputs that need them."""

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _check_pair(a, b, "mul")
        self.a, self.b = a, b
        return a * b

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        grad_a = grad_b = None
        if self.needs_grad(0):
            grad_a = _unbroadcast(grad * self.b, self.a.shape)
        if self.needs_grad(1):
            grad_b = _unbroadcast(grad * self.a, self.b.shape)
        return grad_a, grad_b


class AddScalar(Function):
    """x + value for a Python constant cast to the tensor dtype."""

    def forward(self, x: np.ndarray, *, value: float) -> np.ndarray:
        return x + x.dtype.type(value)

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        return (grad,)


class ScalarMul(Function):
    """x * factor for a Python constant cast to the tensor dtype."""

    def forward(self, x: np.ndarray, *, factor: float) -> np.ndarray:
        self.factor = x.dtype.type(factor)
        return x * self.factor

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        return (grad * self.factor,)


class Relu(Function):
    """max(x, 0); the gradient passes where x > 0."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.mask = x > 0
        return np.where(self.mask, x, x.dtype.type(0))

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        return (np.where(self.mask, grad, grad.dtype.type(0)),)


class Exp(Function):
    """e**x; backward reuses the forward output."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out = np.exp(x)
        return self.out

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        return (grad * self.out,)


class Abs(Function):
    """|x| with gradient sign(x), so 0 at the origin."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.sign = np.sign(x)
        return np.abs(x)

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        return (grad * self.sign,)


class Sqrt(Function):
    """Square root; the gradient is 1 / (2 sqrt(x))."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out = np.sqrt(x)
        return self.out

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        return (grad / (2 * self.out),)


class Square(Function):
    """x * x."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        return x * x

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        return (2 * grad * self.x,)


class Sum(Function):
    """Sum reduction; keeps reduced axes as size 1 unless over is 'all'."""

    def forward(self, x: np.ndarray, *, over: ReduceOver) -> np.ndarray:
        self.shape = x.shape
        if over == "all" or x.ndim == 0:
            return np.asarray(x.sum(), dtype=x.dtype)
        return x.sum(axis=_reduce_axes(x, over), keepdims=True)

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        return (np.broadcast_to(grad, self.shape),)


class Mean(Function):
    """Mean reduction with the same axis handling as Sum."""

    def forward(self, x: np.ndarray, *, over: ReduceOver) -> np.ndarray:
        self.shape = x.shape
        if over == "all" or x.ndim == 0:
            self.count = x.size
            return np.asarray(x.mean(), dtype=x.dtype)
        axes = _reduce_axes(x, over)
        self.count = int(np.prod([x.shape[a] for a in axes]))
        return x.mean(axis=axes, keepdims=True)

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        scale = grad.dtype.type(1.0 / self.count)
        return (np.broadcast_to(grad * scale, self.shape),)


class Concat(Function):
    """Join along axis 1; backward splits the gradient at the input borders."""

    def forward(self, *arrays: np.ndarray) -> np.ndarray:
        self.bounds = np.cumsum([a.shape[1] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=1)

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        return tuple(np.split(grad, self.bounds, axis=1))


def _reduce_axes(x: np.ndarray, over: str) -> tuple[int, ...]:
    if x.ndim != 4:
        raise ShapeError(f"reduction over {over!r} needs a 4-D tensor, got {x.shape}")
    try:
        return _REDUCE_AXES[over]
    except KeyError:
        raise ValueError(f"unknown reduction: {over!r}") from None


def _as_tensor(value: Union[Tensor, Scalar]) -> Optional[Tensor]:
    if isinstance(value, Tensor):
        return value
    return None


def add(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    """Elementwise sum; ``b`` may be a Python scalar."""
    other = _as_tensor(b)
    if other is None:
        return AddScalar.apply(a, value=float(b))  # type: ignore[arg-type]
    return Add.apply(a, other)


def sub(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    """Elementwise difference; ``b`` may be a Python scalar."""
    other = _as_tensor(b)
    if other is None:
        return AddScalar.apply(a, value=-float(b))  # type: ignore[arg-type]
    return Sub.apply(a, other)


def mul(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    """Elementwise product; ``b`` may be a Python scalar."""
    other = _as_tensor(b)
    if other is None:
        return ScalarMul.apply(a, factor=float(b))  # type: ignore[arg-type]
    return Mul.apply(a, other)


def scalar_mul(x: Tensor, factor: float) -> Tensor:
    """Multiply by a constant."""
    return ScalarMul.apply(x, factor=factor)


def relu(x: Tensor) -> Tensor:
    """max(x, 0)."""
    return Relu.apply(x)


def exp(x: Tensor) -> Tensor:
    """Elementwise exponential.

    Args:
        x: Input of any rank

    Returns:
        Tensor of the same shape holding e**x
    """
    return Exp.apply(x)


def abs_(x: Tensor) -> Tensor:
    """Elementwise absolute value; the subgradient at 0 is 0."""
    return Abs.apply(x)


def sqrt_(x: Tensor) -> Tensor:
    """Elementwise square root.

    Args:
        x: Non-negative input; the gradient is infinite at 0

    Returns:
        Tensor of the same shape
    """
    return Sqrt.apply(x)


def square(x: Tensor) -> Tensor:
    """Elementwise x * x."""
    return Square.apply(x)


def reduce_sum(x: Tensor, over: ReduceOver = "all") -> Tensor:
    """Sum over every element, the spatial axes, or each sample."""
    return Sum.apply(x, over=over)


def reduce_mean(x: Tensor, over: ReduceOver = "all") -> Tensor:
    """Arithmetic mean over every element, the spatial axes, or each sample."""
    return Mean.apply(x, over=over)


def concat_channels(inputs: Sequence[Tensor]) -> Tensor:
    """Concatenate 4-D tensors along the channel axis, in argument order.

    Raises:
        ShapeError: Fewer than two inputs or mismatched N, H, W
    """
    if len(inputs) < 2:
        raise ShapeError("concat_channels needs at least two inputs")
    first = inputs[0].shape
    for t in inputs:
        if t.ndim != 4:
            raise ShapeError(f"concat_channels needs 4-D tensors, got {t.shape}")
        if (t.shape[0], t.shape[2], t.shape[3]) != (first[0], first[2], first[3]):
            raise ShapeError(f"concat_channels: {t.shape} does not match {first}")
    return Concat.apply(*inputs)
