"""Fixtures for training tests: a narrow network with the full wiring."""

from typing import Callable

import pytest

from aggfov.model.blocks import DecoderBlockSpec, EncoderBlockSpec
from aggfov.model.network import HallucinationNet
from aggfov.model.params import initialize


def tiny_network(seed: int = 0) -> HallucinationNet:
    """Four encoders and four decoders with six or three filters each."""
    net = HallucinationNet(
        encoders=(
            EncoderBlockSpec(1, 6),
            EncoderBlockSpec(6, 6),
            EncoderBlockSpec(6, 6),
            EncoderBlockSpec(6, 6),
        ),
        decoders=(
            DecoderBlockSpec(6, 6),
            DecoderBlockSpec(6 + 6, 3),
            DecoderBlockSpec(3 + 6, 3),
            DecoderBlockSpec(3 + 6, 3),
        ),
    )
    net.params = initialize(net.declared_parameters(), net.declared_norm_layers(), seed)
    return net


@pytest.fixture
def make_net() -> Callable[..., HallucinationNet]:
    """Factory for seeded narrow networks."""
    return tiny_network
