"""Adam with bias correction over a named parameter set."""

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from aggfov.autodiff.tensor import Tensor
from aggfov.common.config import AdamConfig
from aggfov.common.errors import NonFiniteError, ShapeError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Moment estimates and step counter.

    ``m`` and ``v`` are keyed by parameter name and mirror parameter shapes;
    they are created lazily on the first step.
    """

    config: AdamConfig = field(default_factory=AdamConfig)
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def moments(self, name: str, like: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """First and second moment of ``name``, zero-initialised on demand."""
        if name not in self.m:
            self.m[name] = np.zeros_like(like)
            self.v[name] = np.zeros_like(like)
        return self.m[name], self.v[name]


def check_gradients(grads: Mapping[str, Optional[np.ndarray]]) -> None:
    """Raise NonFiniteError naming the first parameter with a NaN/Inf gradient."""
    for name in sorted(grads):
        g = grads[name]
        if g is not None and not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter {name}")


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Optional[np.ndarray]],
    state: AdamState,
) -> None:
    """Apply one Adam update to every parameter.

    Missing gradients count as zero. Parameters receive new arrays instead of
    being written in place, so replicas built on the previous values keep them.

    Raises:
        NonFiniteError: A gradient holds NaN/Inf (nothing is updated)
        ShapeError: A gradient shape differs from its parameter
    """
    check_gradients(grads)
    for name, p in params.items():
        g = grads.get(name)
        if g is not None and g.shape != p.shape:
            raise ShapeError(
                f"gradient for {name} has shape {g.shape}, parameter has {p.shape}"
            )

    cfg = state.config
    state.t += 1
    bc1 = 1.0 - cfg.beta1**state.t
    bc2 = 1.0 - cfg.beta2**state.t

    for name in sorted(params):
        p = params[name]
        dtype = p.dtype.type
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        m, v = state.moments(name, p.data)
        m = dtype(cfg.beta1) * m + dtype(1.0 - cfg.beta1) * g
        v = dtype(cfg.beta2) * v + dtype(1.0 - cfg.beta2) * (g * g)
        state.m[name], state.v[name] = m, v
        m_hat = m / dtype(bc1)
        v_hat = v / dtype(bc2)
        p.data = p.data - dtype(cfg.lr) * m_hat / (np.sqrt(v_hat) + dtype(cfg.eps))

    logger.debug("Adam step %d over %d parameters", state.t, len(params))
