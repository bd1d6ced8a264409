"""Central finite-difference gradient checks in 64-bit precision."""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from aggfov.autodiff.tensor import Tape, Tensor, backward, no_grad

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-6


@dataclass(frozen=True)
class GradcheckResult:
    """Outcome of comparing tape gradients with finite differences."""

    max_error: float
    worst_index: tuple[int, ...]
    analytic: float
    numeric: float
    coords_checked: int

    def passed(self, tolerance: float) -> bool:
        """True when the worst coordinate is within ``tolerance``."""
        return bool(self.max_error < tolerance)

    def to_dict(self) -> dict[str, Any]:
        """Convert to a JSON-friendly dictionary."""
        return {
            "max_error": self.max_error,
            "worst_index": list(self.worst_index),
            "analytic": self.analytic,
            "numeric": self.numeric,
            "coords_checked": self.coords_checked,
        }


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """``|a - n| / max(|a|, |n|, 1)`` elementwise."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return np.abs(analytic - numeric) / scale


def _scalar(f: Callable[[Tensor], Tensor], x: np.ndarray) -> float:
    with no_grad():
        return f(Tensor(x, dtype=np.float64)).item()


def check_gradient(
    f: Callable[[Tensor], Tensor],
    x: Any,
    h: float = DEFAULT_STEP,
    max_coords: Optional[int] = None,
    seed: int = 0,
) -> GradcheckResult:
    """Compare dF/dx from the tape with central differences.

    Args:
        f: Maps a tensor to a scalar tensor
        x: Point of evaluation (cast to float64)
        h: Finite-difference step
        max_coords: Check a seeded random subset of this many coordinates
        seed: Seed for the coordinate subset

    Returns:
        GradcheckResult with the worst coordinate
    """
    point = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    leaf = Tensor(point.copy(), requires_grad=True, dtype=np.float64)
    with Tape():
        out = f(leaf)
        backward(out)
    analytic_grad = leaf.grad if leaf.grad is not None else np.zeros_like(point)

    flat_indices = np.arange(point.size)
    if max_coords is not None and max_coords < point.size:
        rng = np.random.default_rng(seed)
        flat_indices = np.sort(rng.choice(point.size, size=max_coords, replace=False))

    analytic = np.empty(len(flat_indices))
    numeric = np.empty(len(flat_indices))
    for i, flat in enumerate(flat_indices):
        index = np.unravel_index(flat, point.shape)
        original = point[index]
        point[index] = original + h
        f_plus = _scalar(f, point)
        point[index] = original - h
        f_minus = _scalar(f, point)
        point[index] = original
        analytic[i] = analytic_grad[index]
        numeric[i] = (f_plus - f_minus) / (2.0 * h)

    if len(flat_indices) == 0:
        return GradcheckResult(0.0, (), 0.0, 0.0, 0)
    errors = relative_error(analytic, numeric)
    worst = int(np.argmax(errors))
    worst_index = tuple(
        int(v) for v in np.unravel_index(flat_indices[worst], point.shape)
    )
    logger.debug(
        "Gradcheck over %d coords: max error %.3e at %s",
        len(flat_indices),
        errors[worst],
        worst_index,
    )
    return GradcheckResult(
        max_error=float(errors[worst]),
        worst_index=worst_index,
        analytic=float(analytic[worst]),
        numeric=float(numeric[worst]),
        coords_checked=len(flat_indices),
    )


def gradcheck(
    f: Callable[[Tensor], Tensor],
    x: Any,
    h: float = DEFAULT_STEP,
    max_coords: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Max relative error between tape and finite-difference gradients."""
    return check_gradient(f, x, h=h, max_coords=max_coords, seed=seed).max_error
