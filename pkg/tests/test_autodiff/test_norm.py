"""Tests for batch normalization."""

from typing import Any

import numpy as np
import pytest

from aggfov.autodiff.gradcheck import gradcheck
from aggfov.autodiff.norm import BN_EPS, RunningStats, batch_norm
from aggfov.autodiff.ops import reduce_sum
from aggfov.autodiff.tensor import Tensor
from aggfov.common.errors import ConfigError, ShapeError


def _affine(
    channels: int, gamma: float = 1.0, beta: float = 0.0
) -> tuple[Tensor, Tensor]:
    return (
        Tensor(np.full(channels, gamma), dtype=np.float64),
        Tensor(np.full(channels, beta), dtype=np.float64),
    )


class TestTrainMode:
    """Tests for batch statistics."""

    def test_normalizes_per_channel(self, rng: np.random.Generator) -> None:
        """Test each channel comes out with mean beta and std gamma."""
        x = Tensor(rng.normal(3.0, 2.0, (4, 2, 5, 5)), dtype=np.float64)
        gamma, beta = _affine(2, gamma=2.0, beta=0.5)
        out = batch_norm(x, gamma, beta, RunningStats.fresh(2, np.dtype(np.float64)))

        means = out.data.mean(axis=(0, 2, 3))
        np.testing.assert_allclose(means, [0.5, 0.5], atol=1e-10)
        np.testing.assert_allclose(out.data.std(axis=(0, 2, 3)), [2.0, 2.0], rtol=1e-4)

    def test_running_update(self, rng: np.random.Generator) -> None:
        """Test running <- 0.9 running + 0.1 batch with the biased variance."""
        data = rng.normal(1.0, 3.0, (3, 2, 4, 4))
        stats = RunningStats.fresh(2, np.dtype(np.float64))
        batch_norm(Tensor(data), *_affine(2), stats)

        np.testing.assert_allclose(stats.mean.data, 0.1 * data.mean(axis=(0, 2, 3)))
        np.testing.assert_allclose(
            stats.var.data, 0.9 + 0.1 * data.var(axis=(0, 2, 3)), rtol=1e-12
        )

    def test_stats_arrays_replaced(self) -> None:
        """Test an update swaps arrays instead of writing into them."""
        stats = RunningStats.fresh(1, np.dtype(np.float64))
        before = stats.mean.data
        batch_norm(Tensor(np.full((1, 1, 2, 2), 5.0)), *_affine(1), stats)

        assert before[0] == 0.0
        assert stats.mean.data[0] == pytest.approx(0.5)

    def test_copy_is_independent(self) -> None:
        """Test a copied stats object does not see later updates."""
        stats = RunningStats.fresh(1, np.dtype(np.float64))
        replica = stats.copy()
        batch_norm(Tensor(np.full((1, 1, 2, 2), 5.0)), *_affine(1), replica)

        assert stats.mean.data[0] == 0.0


class TestEvalMode:
    """Tests for running-statistics normalization."""

    def test_uses_running_stats(self) -> None:
        """Test eval mode reads mean and variance from the stats."""
        stats = RunningStats(
            mean=Tensor(np.array([1.0]), dtype=np.float64),
            var=Tensor(np.array([4.0]), dtype=np.float64),
        )
        x = Tensor(np.full((1, 1, 1, 2), 3.0), dtype=np.float64)
        out = batch_norm(x, *_affine(1, gamma=3.0, beta=1.0), stats, mode="eval")

        expected = 3.0 * (3.0 - 1.0) / np.sqrt(4.0 + BN_EPS) + 1.0
        np.testing.assert_allclose(out.data, expected)
        assert stats.mean.data[0] == 1.0


class TestValidation:
    """Tests for argument checks."""

    def test_unknown_mode(self) -> None:
        """Test an unknown mode raises ConfigError."""
        x = Tensor(np.zeros((1, 1, 2, 2)))
        mode: Any = "test"
        with pytest.raises(ConfigError):
            batch_norm(x, *_affine(1), RunningStats.fresh(1), mode=mode)

    def test_channel_mismatch(self) -> None:
        """Test gamma must match the channel count."""
        x = Tensor(np.zeros((1, 3, 2, 2)))
        with pytest.raises(ShapeError):
            batch_norm(x, *_affine(2), RunningStats.fresh(3))

    def test_needs_4d(self) -> None:
        """Test a 2-D input raises ShapeError."""
        with pytest.raises(ShapeError):
            batch_norm(Tensor(np.zeros((2, 3))), *_affine(3), RunningStats.fresh(3))

    def test_empty_batch(self) -> None:
        """Test an empty batch raises ShapeError."""
        with pytest.raises(ShapeError):
            x = Tensor(np.zeros((0, 1, 2, 2)))
            batch_norm(x, *_affine(1), RunningStats.fresh(1))


class TestGradients:
    """Finite-difference checks in both modes."""

    @pytest.mark.parametrize("mode", ["train", "eval"])
    def test_input_gradient(self, rng: np.random.Generator, mode: str) -> None:
        """Test dL/dx."""
        gamma = Tensor(rng.uniform(0.5, 1.5, 3), dtype=np.float64)
        beta = Tensor(rng.standard_normal(3), dtype=np.float64)
        proj = Tensor(rng.standard_normal((2, 3, 3, 3)), dtype=np.float64)

        def f(x: Tensor) -> Tensor:
            stats = RunningStats.fresh(3, np.dtype(np.float64))
            out = batch_norm(x, gamma, beta, stats, mode)  # type: ignore[arg-type]
            return reduce_sum(out * proj)

        assert gradcheck(f, rng.standard_normal((2, 3, 3, 3))) < 1e-6

    def test_affine_gradients(self, rng: np.random.Generator) -> None:
        """Test dL/dgamma and dL/dbeta."""
        x = Tensor(rng.standard_normal((2, 3, 3, 3)), dtype=np.float64)
        beta = Tensor(np.zeros(3), dtype=np.float64)
        gamma = Tensor(np.ones(3), dtype=np.float64)
        proj = Tensor(rng.standard_normal((2, 3, 3, 3)), dtype=np.float64)

        def by_gamma(g: Tensor) -> Tensor:
            stats = RunningStats.fresh(3, np.dtype(np.float64))
            return reduce_sum(batch_norm(x, g, beta, stats) * proj)

        def by_beta(b: Tensor) -> Tensor:
            stats = RunningStats.fresh(3, np.dtype(np.float64))
            return reduce_sum(batch_norm(x, gamma, b, stats) * proj)

        assert gradcheck(by_gamma, rng.uniform(0.5, 1.5, 3)) < 1e-6
        assert gradcheck(by_beta, rng.standard_normal(3)) < 1e-6
