"""Tensor container, differentiation tape and the Function base class.

Every primitive is a Function subclass working on numpy arrays. Applying a
Function whose inputs require gradients records it on the calling thread's
active Tape; ``backward(loss)`` replays that tape in reverse.
"""

import logging
import threading
from abc import abstractmethod
from contextlib import contextmanager
from typing import Any, Iterator, Optional, Sequence, Union

import numpy as np

from aggfov.common.errors import NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_DTYPE = np.float32

Scalar = Union[int, float]

_local = threading.local()
_debug = False


def set_debug(enabled: bool) -> None:
    """Enable or disable the non-finite check after every forward op."""
    global _debug
    _debug = bool(enabled)


class Tensor:
    """Dense value container of rank 0 to 4 taking part in a Tape.

    Network activations are (batch, channels, height, width); parameters use
    the natural rank of their kind (conv weights 4-D, biases 1-D) and losses
    are 0-d.
    """

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[Any] = None,
    ):
        if dtype is None:
            if isinstance(data, np.ndarray) and np.issubdtype(data.dtype, np.floating):
                dtype = data.dtype
            else:
                dtype = DEFAULT_DTYPE
        array = np.ascontiguousarray(data, dtype=dtype)
        if array.ndim > 4:
            raise ShapeError(f"tensors are limited to rank 4, got shape {array.shape}")
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.creator: Optional["Function"] = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of the underlying array."""
        return tuple(self.data.shape)

    @property
    def dtype(self) -> np.dtype:
        """Element type of the underlying array."""
        return self.data.dtype

    @property
    def ndim(self) -> int:
        """Rank of the tensor."""
        return self.data.ndim

    @property
    def size(self) -> int:
        """Number of scalars."""
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        """True when the tensor was not produced by a recorded op."""
        return self.creator is None

    def item(self) -> float:
        """Return the value of a single-element tensor."""
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Return the underlying array (not a copy)."""
        return self.data

    def detach(self) -> "Tensor":
        """Return a tensor sharing data but cut from the tape."""
        return Tensor(self.data, requires_grad=False, name=self.name)

    def zero_grad(self) -> None:
        """Drop the accumulated gradient."""
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        """Add ``grad`` into this tensor's accumulator."""
        if grad.shape != self.data.shape:
            raise ShapeError(
                f"gradient shape {grad.shape} does not match tensor {self.data.shape}"
            )
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    def backward(self) -> None:
        """Backpropagate from this scalar tensor."""
        backward(self)

    def __add__(self, other: Union["Tensor", Scalar]) -> "Tensor":
        from aggfov.autodiff.ops import add

        return add(self, other)

    def __radd__(self, other: Scalar) -> "Tensor":
        from aggfov.autodiff.ops import add

        return add(self, other)

    def __sub__(self, other: Union["Tensor", Scalar]) -> "Tensor":
        from aggfov.autodiff.ops import sub

        return sub(self, other)

    def __rsub__(self, other: Scalar) -> "Tensor":
        from aggfov.autodiff.ops import add, scalar_mul

        return add(scalar_mul(self, -1.0), other)

    def __mul__(self, other: Union["Tensor", Scalar]) -> "Tensor":
        from aggfov.autodiff.ops import mul

        return mul(self, other)

    def __rmul__(self, other: Scalar) -> "Tensor":
        from aggfov.autodiff.ops import mul

        return mul(self, other)

    def __truediv__(self, other: Scalar) -> "Tensor":
        from aggfov.autodiff.ops import scalar_mul

        return scalar_mul(self, 1.0 / float(other))

    def __neg__(self) -> "Tensor":
        from aggfov.autodiff.ops import scalar_mul

        return scalar_mul(self, -1.0)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return (
            f"Tensor(shape={self.shape}, dtype={self.dtype}, "
            f"requires_grad={self.requires_grad}{label})"
        )


class Function:
    """Base class for differentiable primitives.

    ``forward`` receives the input arrays and keyword options and returns the
    output array. ``backward`` receives dLoss/dOutput and returns one gradient
    (or None) per input, in input order.
    """

    def __init__(self, *inputs: Tensor):
        self.inputs: Sequence[Tensor] = inputs
        self.output: Optional[Tensor] = None
        self.tape: Optional["Tape"] = None
        self.index = -1

    @abstractmethod
    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        """Compute the output array."""
        raise NotImplementedError("Forward pass not implemented for this function")

    @abstractmethod
    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        """Map dLoss/dOutput to dLoss/dInput for every input."""
        raise NotImplementedError("Backward pass not implemented for this function")

    def needs_grad(self, position: int) -> bool:
        """Whether input ``position`` wants a gradient."""
        return self.inputs[position].requires_grad

    @classmethod
    def apply(cls, *inputs: Tensor, **kwargs: Any) -> Tensor:
        """Run the op and record it on the active tape when needed."""
        fn = cls(*inputs)
        out_data = fn.forward(*(t.data for t in inputs), **kwargs)
        if _debug and not np.all(np.isfinite(out_data)):
            raise NonFiniteError(f"{cls.__name__} produced non-finite values")

        requires_grad = any(t.requires_grad for t in inputs)
        out = Tensor(out_data, requires_grad=requires_grad)
        tape = current_tape() if requires_grad else None
        if tape is not None:
            fn.output = out
            out.creator = fn
            tape.record(fn)
        return out


class Tape:
    """Ordered record of executed primitive ops.

    Ops are appended as they run, so each op's inputs were produced by
    earlier entries. The tape is released after a backward pass.
    """

    def __init__(self) -> None:
        self.ops: list[Function] = []

    def __len__(self) -> int:
        return len(self.ops)

    def record(self, fn: Function) -> None:
        """Append an executed op."""
        fn.tape = self
        fn.index = len(self.ops)
        self.ops.append(fn)

    def clear(self) -> None:
        """Release every recorded op and detach its output."""
        for fn in self.ops:
            if fn.output is not None:
                fn.output.creator = None
            fn.output = None
            fn.inputs = ()
            fn.tape = None
        self.ops = []

    def backward(self, loss: Tensor) -> None:
        """Accumulate dLoss/dLeaf into every leaf that requires gradients."""
        if loss.creator is None or loss.creator.tape is not self:
            raise ValueError("loss was not recorded on this tape")

        grads: dict[int, np.ndarray] = {
            id(loss): np.ones_like(loss.data),
        }
        for fn in reversed(self.ops[: loss.creator.index + 1]):
            out = fn.output
            if out is None:
                continue
            grad = grads.pop(id(out), None)
            if grad is None:
                continue
            input_grads = fn.backward(grad)
            for tensor, g in zip(fn.inputs, input_grads):
                if g is None or not tensor.requires_grad:
                    continue
                if tensor.creator is None:
                    tensor.accumulate_grad(g)
                elif id(tensor) in grads:
                    grads[id(tensor)] = grads[id(tensor)] + g
                else:
                    grads[id(tensor)] = g

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc: object) -> None:
        _stack().pop()


class _NoGrad:
    """Stack marker disabling recording."""


_NO_GRAD = _NoGrad()


def _stack() -> list[Any]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def current_tape() -> Optional[Tape]:
    """The calling thread's active tape, or None inside ``no_grad``."""
    stack = _stack()
    if stack:
        top = stack[-1]
        return None if top is _NO_GRAD else top
    default = getattr(_local, "default_tape", None)
    if default is None:
        default = Tape()
        _local.default_tape = default
    return default


@contextmanager
def no_grad() -> Iterator[None]:
    """Run ops without recording them."""
    _stack().append(_NO_GRAD)
    try:
        yield
    finally:
        _stack().pop()


def backward(loss: Tensor) -> None:
    """Backpropagate from a scalar loss and release its tape.

    Raises:
        ShapeError: If the loss has more than one element
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.creator is None:
        if loss.requires_grad:
            loss.accumulate_grad(np.ones_like(loss.data))
        return
    tape = loss.creator.tape
    assert tape is not None
    tape.backward(loss)
    logger.debug("Backward pass over %d recorded ops", len(tape))
    tape.clear()
