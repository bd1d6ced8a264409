"""Tensor container, reverse-mode differentiation and the network primitives."""
