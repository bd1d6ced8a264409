"""Autodiff core tests."""
