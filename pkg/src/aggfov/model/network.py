"""The depth-to-YUV hallucination network.

Four encoder blocks with filters 48/60/192/288 halve the resolution four
times; four decoder blocks with filters 96/30/24/3 bring it back. Decoders 3
to 1 receive the matching encoder output concatenated to their input. A 5x5
"logits" convolution and a 3x3 output convolution form a linear head.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from aggfov.autodiff.conv import conv2d
from aggfov.autodiff.norm import Mode
from aggfov.autodiff.ops import concat_channels
from aggfov.autodiff.tensor import Tensor
from aggfov.common.errors import DimensionError, ShapeError
from aggfov.model.blocks import (
    DecoderBlockSpec,
    EncoderBlockSpec,
    decoder_block_forward,
    encoder_block_forward,
)
from aggfov.model.params import ParameterSet, ParamSpec, initialize

logger = logging.getLogger(__name__)

ENCODER_FILTERS = (48, 60, 192, 288)
DECODER_FILTERS = (96, 30, 24, 3)
INPUT_CHANNELS = 1
OUTPUT_CHANNELS = 3
LOGITS_KERNEL = 5
OUT_KERNEL = 3

# Four stride-2 stages.
SPATIAL_DIVISOR = 16


def _encoder_ladder() -> tuple[EncoderBlockSpec, ...]:
    channels = (INPUT_CHANNELS,) + ENCODER_FILTERS[:-1]
    return tuple(EncoderBlockSpec(c, d) for c, d in zip(channels, ENCODER_FILTERS))


def _decoder_ladder() -> tuple[DecoderBlockSpec, ...]:
    # Dec4 sees e4 alone; every later decoder sees concat(previous, skip).
    skips = tuple(reversed(ENCODER_FILTERS[:-1]))
    channels = [ENCODER_FILTERS[-1]]
    for previous, skip in zip(DECODER_FILTERS[:-1], skips):
        channels.append(previous + skip)
    return tuple(DecoderBlockSpec(c, d) for c, d in zip(channels, DECODER_FILTERS))


def _head_parameters() -> list[ParamSpec]:
    c = DECODER_FILTERS[-1]
    return [
        ParamSpec(
            "head.logits.weight",
            (OUTPUT_CHANNELS, c, LOGITS_KERNEL, LOGITS_KERNEL),
            "conv",
        ),
        ParamSpec("head.logits.bias", (OUTPUT_CHANNELS,), "bias"),
        ParamSpec(
            "head.out.weight",
            (OUTPUT_CHANNELS, OUTPUT_CHANNELS, OUT_KERNEL, OUT_KERNEL),
            "conv",
        ),
        ParamSpec("head.out.bias", (OUTPUT_CHANNELS,), "bias"),
    ]


@dataclass
class HallucinationNet:
    """Layer graph plus its named parameters."""

    encoders: tuple[EncoderBlockSpec, ...] = field(default_factory=_encoder_ladder)
    decoders: tuple[DecoderBlockSpec, ...] = field(default_factory=_decoder_ladder)
    params: ParameterSet = field(default_factory=ParameterSet)

    @staticmethod
    def encoder_name(index: int) -> str:
        return f"enc{index + 1}"

    @staticmethod
    def decoder_name(index: int) -> str:
        # decoders are numbered from the bottleneck down: dec4 runs first
        return f"dec{4 - index}"

    def declared_parameters(self) -> list[ParamSpec]:
        """Every trainable tensor the layer graph needs, in build order."""
        specs: list[ParamSpec] = []
        for i, enc in enumerate(self.encoders):
            specs += [s.prefixed(self.encoder_name(i)) for s in enc.parameters()]
        for i, dec in enumerate(self.decoders):
            specs += [s.prefixed(self.decoder_name(i)) for s in dec.parameters()]
        return specs + _head_parameters()

    def declared_norm_layers(self) -> list[tuple[str, int]]:
        """Every normalization layer with its channel count."""
        layers: list[tuple[str, int]] = []
        for i, enc in enumerate(self.encoders):
            layers += [(f"{self.encoder_name(i)}.{n}", c) for n, c in enc.norm_layers()]
        for i, dec in enumerate(self.decoders):
            layers += [(f"{self.decoder_name(i)}.{n}", c) for n, c in dec.norm_layers()]
        return layers

    def with_params(self, params: ParameterSet) -> "HallucinationNet":
        """Same graph over another parameter set (a replica or a cast copy)."""
        return HallucinationNet(self.encoders, self.decoders, params)

    def forward(self, depth: Tensor, mode: Mode = "train") -> Tensor:
        """See :func:`forward`."""
        return forward(self, depth, mode)


def build_network(seed: int, dtype: Optional[np.dtype] = None) -> HallucinationNet:
    """Build the network with seeded fan-in-scaled uniform weights."""
    net = HallucinationNet()
    net.params = initialize(
        net.declared_parameters(), net.declared_norm_layers(), seed, dtype=dtype
    )
    logger.debug(
        "Built network: %d tensors, %d trainable scalars",
        len(net.params),
        net.params.count(),
    )
    return net


def check_input(depth: Tensor) -> None:
    """Validate a depth batch against the network's input contract.

    Raises:
        ShapeError: Not (N, 1, H, W)
        DimensionError: H or W not divisible by 16
    """
    if depth.ndim != 4 or depth.shape[1] != INPUT_CHANNELS:
        raise ShapeError(f"depth input must be (N, 1, H, W), got {depth.shape}")
    _, _, height, width = depth.shape
    if height % SPATIAL_DIVISOR:
        raise DimensionError("height", height, SPATIAL_DIVISOR)
    if width % SPATIAL_DIVISOR:
        raise DimensionError("width", width, SPATIAL_DIVISOR)


def forward(net: HallucinationNet, depth: Tensor, mode: Mode = "train") -> Tensor:
    """Map a depth batch (N, 1, H, W) to YUV predictions (N, 3, H, W)."""
    check_input(depth)
    scope = net.params.scope()

    skips: list[Tensor] = []
    x = depth
    for i, enc in enumerate(net.encoders):
        x, skip = encoder_block_forward(enc, scope.child(net.encoder_name(i)), x, mode)
        skips.append(skip)

    # e4 feeds Dec4 directly; e3, e2, e1 are concatenated in that order
    pending = skips[:-1]
    for i, dec in enumerate(net.decoders):
        if i > 0:
            x = concat_channels([x, pending.pop()])
        x = decoder_block_forward(dec, scope.child(net.decoder_name(i)), x, mode)

    head = scope.child("head")
    logits = conv2d(x, head.param("logits.weight"), head.param("logits.bias"))
    return conv2d(logits, head.param("out.weight"), head.param("out.bias"))


def list_params(net: HallucinationNet) -> list[tuple[str, tuple[int, ...]]]:
    """Trainable parameter names and shapes in lexicographic order."""
    return [(name, t.shape) for name, t in net.params.named_parameters()]


def count_params(net: HallucinationNet) -> int:
    """Total trainable scalars."""
    return net.params.count()
