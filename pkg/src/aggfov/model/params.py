"""Named parameter registry shared by the blocks, the trainer and checkpoints.

Trainable tensors are keyed by dotted names such as
``enc1.agg1.k11d3.weight``. Batch-norm running statistics live beside them
under ``<layer>.running_mean`` / ``<layer>.running_var``; they are saved in
checkpoints but never counted or optimized.
"""

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from aggfov.autodiff.norm import RunningStats
from aggfov.autodiff.tensor import Tensor
from aggfov.common.errors import MissingParameterError, ShapeMismatchError

ParamKind = Literal["conv", "conv_transpose", "bias", "gamma", "beta"]

RUNNING_MEAN = "running_mean"
RUNNING_VAR = "running_var"


@dataclass(frozen=True)
class ParamSpec:
    """Declared name, shape and initializer kind of one trainable tensor."""

    name: str
    shape: tuple[int, ...]
    kind: ParamKind

    @property
    def size(self) -> int:
        """Number of scalars."""
        return int(np.prod(self.shape))

    def fan_in(self) -> int:
        """Inputs feeding one output unit (weights only)."""
        if self.kind == "conv":
            return self.shape[1] * self.shape[2] * self.shape[3]
        if self.kind == "conv_transpose":
            return self.shape[0] * self.shape[2] * self.shape[3]
        return 0

    def prefixed(self, prefix: str) -> "ParamSpec":
        """Same spec under ``prefix.``."""
        return ParamSpec(f"{prefix}.{self.name}", self.shape, self.kind)


class ParameterSet:
    """Trainable tensors plus batch-norm running statistics, by name."""

    def __init__(self) -> None:
        self.params: dict[str, Tensor] = {}
        self.stats: dict[str, RunningStats] = {}

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __len__(self) -> int:
        return len(self.params)

    @property
    def dtype(self) -> np.dtype:
        """Element type of the weights (float32 unless cast)."""
        for tensor in self.params.values():
            return tensor.dtype
        return np.dtype(np.float32)

    def add_param(self, name: str, tensor: Tensor) -> None:
        """Register a trainable tensor."""
        tensor.name = name
        tensor.requires_grad = True
        self.params[name] = tensor

    def add_stats(self, name: str, stats: RunningStats) -> None:
        """Register running statistics of the normalization layer ``name``."""
        self.stats[name] = stats

    def param(self, name: str) -> Tensor:
        """Look up a trainable tensor."""
        try:
            return self.params[name]
        except KeyError:
            raise KeyError(f"unknown parameter: {name}") from None

    def running(self, name: str) -> RunningStats:
        """Look up the running statistics of a normalization layer."""
        try:
            return self.stats[name]
        except KeyError:
            raise KeyError(f"unknown normalization layer: {name}") from None

    def scope(self, prefix: str = "") -> "Scope":
        """View of the set under a dotted prefix."""
        return Scope(self, prefix)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        """Trainable tensors in lexicographic name order."""
        return sorted(self.params.items())

    def count(self) -> int:
        """Total trainable scalars."""
        return sum(t.size for t in self.params.values())

    def zero_grad(self) -> None:
        """Drop every accumulated gradient."""
        for t in self.params.values():
            t.zero_grad()

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Every persisted array (weights and running statistics) by name."""
        arrays = {name: t.data for name, t in self.params.items()}
        for name, stats in self.stats.items():
            arrays[f"{name}.{RUNNING_MEAN}"] = stats.mean.data
            arrays[f"{name}.{RUNNING_VAR}"] = stats.var.data
        return dict(sorted(arrays.items()))

    def expected_shapes(self) -> dict[str, tuple[int, ...]]:
        """Shape of every persisted array by name."""
        return {name: tuple(a.shape) for name, a in self.state_arrays().items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Replace every persisted array, validating names and shapes.

        Raises:
            MissingParameterError: An expected name is absent
            ShapeMismatchError: A shape differs from the registry
        """
        expected = self.expected_shapes()
        for name, shape in expected.items():
            if name not in arrays:
                raise MissingParameterError(name, found=sorted(arrays))
            actual = tuple(arrays[name].shape)
            if actual != shape:
                raise ShapeMismatchError(name, shape, actual)
        for name, tensor in self.params.items():
            tensor.data = np.array(arrays[name], dtype=tensor.dtype)
        for name, stats in self.stats.items():
            mean = arrays[f"{name}.{RUNNING_MEAN}"]
            var = arrays[f"{name}.{RUNNING_VAR}"]
            stats.mean.data = np.array(mean, dtype=stats.mean.dtype)
            stats.var.data = np.array(var, dtype=stats.var.dtype)

    def replica(self) -> "ParameterSet":
        """Worker replica: fresh leaf tensors over the same weight arrays.

        Weights are shared read-only; gradients and running statistics are
        private to the replica.
        """
        copy = ParameterSet()
        for name, tensor in self.params.items():
            copy.add_param(name, Tensor(tensor.data, dtype=tensor.dtype))
        for name, stats in self.stats.items():
            copy.add_stats(name, stats.copy())
        return copy

    def astype(self, dtype: np.dtype) -> "ParameterSet":
        """Deep copy with every array cast to ``dtype``."""
        copy = ParameterSet()
        for name, tensor in self.params.items():
            copy.add_param(name, Tensor(tensor.data.astype(dtype), dtype=dtype))
        for name, stats in self.stats.items():
            copy.add_stats(
                name,
                RunningStats(
                    mean=Tensor(stats.mean.data.astype(dtype), dtype=dtype),
                    var=Tensor(stats.var.data.astype(dtype), dtype=dtype),
                    momentum=stats.momentum,
                    eps=stats.eps,
                ),
            )
        return copy


@dataclass(frozen=True)
class Scope:
    """A ParameterSet seen through a dotted prefix."""

    owner: ParameterSet
    prefix: str = ""

    def qualify(self, name: str) -> str:
        """Full registry name of a local name."""
        return f"{self.prefix}.{name}" if self.prefix else name

    def child(self, name: str) -> "Scope":
        """Nested scope."""
        return Scope(self.owner, self.qualify(name))

    def param(self, name: str) -> Tensor:
        """Trainable tensor under this scope."""
        return self.owner.param(self.qualify(name))

    def running(self, name: str) -> RunningStats:
        """Running statistics under this scope."""
        return self.owner.running(self.qualify(name))


def initialize(
    specs: list[ParamSpec],
    norm_layers: list[tuple[str, int]],
    seed: int,
    dtype: Optional[np.dtype] = None,
) -> ParameterSet:
    """Create a ParameterSet from declarations with seeded He-uniform weights.

    Weights draw from U(-b, b) with ``b = sqrt(6 / fan_in)`` in declaration
    order from one generator; biases and ``beta`` start at 0, ``gamma`` at 1.
    """
    dtype = np.dtype(dtype or np.float32)
    rng = np.random.default_rng(seed)
    params = ParameterSet()
    for spec in specs:
        if spec.kind in ("conv", "conv_transpose"):
            bound = np.sqrt(6.0 / spec.fan_in())
            data = rng.uniform(-bound, bound, size=spec.shape)
        elif spec.kind == "gamma":
            data = np.ones(spec.shape)
        else:
            data = np.zeros(spec.shape)
        params.add_param(spec.name, Tensor(data.astype(dtype), dtype=dtype))
    for name, channels in norm_layers:
        params.add_stats(name, RunningStats.fresh(channels, dtype=dtype))
    return params
