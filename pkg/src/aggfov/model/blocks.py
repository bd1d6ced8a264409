"""Aggregated field-of-view blocks and the encoder/decoder blocks built on them.

An AggConv block runs six same-padded convolutions of different kernel sizes
and dilations side by side, concatenates their feature maps and normalizes
the result. AggTrConv does the same with three transposed convolutions and
is used for learned upsampling in the decoder.
"""

from dataclasses import dataclass
from typing import ClassVar

from aggfov.autodiff.conv import conv2d, conv2d_transpose, effective_extent
from aggfov.autodiff.norm import Mode, batch_norm
from aggfov.autodiff.ops import concat_channels, relu
from aggfov.autodiff.tensor import Tensor
from aggfov.common.errors import ConfigError, DimensionError
from aggfov.model.params import ParamSpec, Scope

Branch = tuple[int, int]

BN_LAYER = "bn"


def branch_name(kernel: int, dilation: int) -> str:
    """Registry name of a branch, e.g. ``k11d3``."""
    return f"k{kernel}d{dilation}"


def effective_receptive_field(kernel: int, dilation: int) -> int:
    """Side length covered by a dilated kernel."""
    return effective_extent(kernel, dilation)


def param_savings(kernel: int, dilation: int) -> float:
    """Share of weights saved against a dense kernel of the same footprint."""
    extent = effective_receptive_field(kernel, dilation)
    return 1.0 - (kernel * kernel) / (extent * extent)


def _norm_specs(filters: int) -> list[ParamSpec]:
    return [
        ParamSpec(f"{BN_LAYER}.gamma", (filters,), "gamma"),
        ParamSpec(f"{BN_LAYER}.beta", (filters,), "beta"),
    ]


@dataclass(frozen=True)
class AggConvSpec:
    """Six-branch aggregated convolution with ``out_filters`` outputs."""

    BRANCHES: ClassVar[tuple[Branch, ...]] = (
        (3, 1),
        (11, 1),
        (5, 2),
        (7, 2),
        (9, 3),
        (11, 3),
    )

    in_channels: int
    out_filters: int
    stride: int = 1

    def __post_init__(self) -> None:
        branches = len(self.BRANCHES)
        if self.out_filters <= 0 or self.out_filters % branches:
            raise ConfigError(
                f"AggConv filters must be a positive multiple of {branches}, "
                f"got {self.out_filters}"
            )
        if self.in_channels <= 0 or self.stride <= 0:
            raise ConfigError("AggConv needs positive input channels and stride")

    @property
    def per_branch(self) -> int:
        """Output channels of each branch."""
        return self.out_filters // len(self.BRANCHES)

    def parameters(self) -> list[ParamSpec]:
        """Declared trainable tensors, relative to the block."""
        specs: list[ParamSpec] = []
        for k, d in self.BRANCHES:
            name = branch_name(k, d)
            specs.append(
                ParamSpec(
                    f"{name}.weight",
                    (self.per_branch, self.in_channels, k, k),
                    "conv",
                )
            )
            specs.append(ParamSpec(f"{name}.bias", (self.per_branch,), "bias"))
        return specs + _norm_specs(self.out_filters)

    def norm_layers(self) -> list[tuple[str, int]]:
        """Normalization layers and their channel counts."""
        return [(BN_LAYER, self.out_filters)]


@dataclass(frozen=True)
class AggTrConvSpec:
    """Three-branch aggregated transposed convolution.

    ``stride`` 2 doubles the spatial size; 1 keeps it.
    """

    BRANCHES: ClassVar[tuple[Branch, ...]] = ((3, 1), (7, 1), (11, 1))

    in_channels: int
    out_filters: int
    stride: int = 1

    def __post_init__(self) -> None:
        branches = len(self.BRANCHES)
        if self.out_filters <= 0 or self.out_filters % branches:
            raise ConfigError(
                f"AggTrConv filters must be a positive multiple of {branches}, "
                f"got {self.out_filters}"
            )
        if self.stride not in (1, 2):
            raise ConfigError(f"AggTrConv stride must be 1 or 2, got {self.stride}")
        if self.in_channels <= 0:
            raise ConfigError("AggTrConv needs positive input channels")

    @property
    def per_branch(self) -> int:
        """Output channels of each branch."""
        return self.out_filters // len(self.BRANCHES)

    def parameters(self) -> list[ParamSpec]:
        """Declared trainable tensors, relative to the block."""
        specs: list[ParamSpec] = []
        for k, d in self.BRANCHES:
            name = branch_name(k, d)
            specs.append(
                ParamSpec(
                    f"{name}.weight",
                    (self.in_channels, self.per_branch, k, k),
                    "conv_transpose",
                )
            )
            specs.append(ParamSpec(f"{name}.bias", (self.per_branch,), "bias"))
        return specs + _norm_specs(self.out_filters)

    def norm_layers(self) -> list[tuple[str, int]]:
        """Normalization layers and their channel counts."""
        return [(BN_LAYER, self.out_filters)]


@dataclass(frozen=True)
class EncoderBlockSpec:
    """AggConv, ReLU, residual AggConv, ReLU, then a 3x3 stride-2 conv."""

    in_channels: int
    filters: int

    @property
    def agg1(self) -> AggConvSpec:
        return AggConvSpec(self.in_channels, self.filters)

    @property
    def agg2(self) -> AggConvSpec:
        return AggConvSpec(self.filters, self.filters)

    def parameters(self) -> list[ParamSpec]:
        """Declared trainable tensors, relative to the block."""
        d = self.filters
        return (
            [s.prefixed("agg1") for s in self.agg1.parameters()]
            + [s.prefixed("agg2") for s in self.agg2.parameters()]
            + [
                ParamSpec("down.weight", (d, d, 3, 3), "conv"),
                ParamSpec("down.bias", (d,), "bias"),
            ]
        )

    def norm_layers(self) -> list[tuple[str, int]]:
        """Normalization layers and their channel counts."""
        return [
            (f"{stage}.{name}", c)
            for stage, spec in (("agg1", self.agg1), ("agg2", self.agg2))
            for name, c in spec.norm_layers()
        ]


@dataclass(frozen=True)
class DecoderBlockSpec:
    """Upsampling AggTrConv, ReLU, residual AggTrConv, ReLU."""

    in_channels: int
    filters: int

    @property
    def tr1(self) -> AggTrConvSpec:
        return AggTrConvSpec(self.in_channels, self.filters, stride=2)

    @property
    def tr2(self) -> AggTrConvSpec:
        return AggTrConvSpec(self.filters, self.filters, stride=1)

    def parameters(self) -> list[ParamSpec]:
        """Declared trainable tensors, relative to the block."""
        return [s.prefixed("tr1") for s in self.tr1.parameters()] + [
            s.prefixed("tr2") for s in self.tr2.parameters()
        ]

    def norm_layers(self) -> list[tuple[str, int]]:
        """Normalization layers and their channel counts."""
        return [
            (f"{stage}.{name}", c)
            for stage, spec in (("tr1", self.tr1), ("tr2", self.tr2))
            for name, c in spec.norm_layers()
        ]


def agg_conv_forward(
    spec: AggConvSpec, params: Scope, x: Tensor, mode: Mode = "train"
) -> Tensor:
    """Concatenate the six branch convolutions and batch-normalize.

    Returns:
        Tensor of shape (N, d, ceil(H/s), ceil(W/s))
    """
    # branch biases precede batch norm: zero gradient in train mode
    branches = []
    for k, d in spec.BRANCHES:
        name = branch_name(k, d)
        branches.append(
            conv2d(
                x,
                params.param(f"{name}.weight"),
                params.param(f"{name}.bias"),
                stride=spec.stride,
                dilation=d,
            )
        )
    return batch_norm(
        concat_channels(branches),
        params.param(f"{BN_LAYER}.gamma"),
        params.param(f"{BN_LAYER}.beta"),
        params.running(BN_LAYER),
        mode,
    )


def agg_tr_conv_forward(
    spec: AggTrConvSpec, params: Scope, x: Tensor, mode: Mode = "train"
) -> Tensor:
    """Concatenate the three transposed branch convolutions and batch-normalize.

    Returns:
        Tensor of shape (N, d, s*H, s*W)
    """
    branches = []
    for k, d in spec.BRANCHES:
        name = branch_name(k, d)
        branches.append(
            conv2d_transpose(
                x,
                params.param(f"{name}.weight"),
                params.param(f"{name}.bias"),
                stride=spec.stride,
                dilation=d,
            )
        )
    return batch_norm(
        concat_channels(branches),
        params.param(f"{BN_LAYER}.gamma"),
        params.param(f"{BN_LAYER}.beta"),
        params.running(BN_LAYER),
        mode,
    )


def encoder_block_forward(
    spec: EncoderBlockSpec, params: Scope, x: Tensor, mode: Mode = "train"
) -> tuple[Tensor, Tensor]:
    """Run one encoder block.

    Returns:
        ``(output, skip)``; the skip handed to the decoder is the block output

    Raises:
        DimensionError: Odd height or width
    """
    _, _, height, width = x.shape
    if height % 2:
        raise DimensionError("height", height, 2)
    if width % 2:
        raise DimensionError("width", width, 2)

    a1 = agg_conv_forward(spec.agg1, params.child("agg1"), x, mode)
    r1 = relu(a1)
    a2 = agg_conv_forward(spec.agg2, params.child("agg2"), r1, mode) + r1
    out = conv2d(
        relu(a2),
        params.param("down.weight"),
        params.param("down.bias"),
        stride=2,
    )
    return out, out


def decoder_block_forward(
    spec: DecoderBlockSpec, params: Scope, x: Tensor, mode: Mode = "train"
) -> Tensor:
    """Run one decoder block; doubles height and width."""
    r1 = relu(agg_tr_conv_forward(spec.tr1, params.child("tr1"), x, mode))
    t2 = agg_tr_conv_forward(spec.tr2, params.child("tr2"), r1, mode)
    return relu(t2 + r1)
