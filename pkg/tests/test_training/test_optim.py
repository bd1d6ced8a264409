"""Tests for the Adam optimizer."""

import numpy as np
import pytest

from aggfov.autodiff.tensor import Tensor
from aggfov.common.config import AdamConfig
from aggfov.common.errors import NonFiniteError, ShapeError
from aggfov.training.optim import AdamState, adam_step, check_gradients


def _params(**arrays: list[float]) -> dict[str, Tensor]:
    return {
        k: Tensor(np.array(v, dtype=np.float64), requires_grad=True)
        for k, v in arrays.items()
    }


class TestAdamStep:
    """Tests for adam_step."""

    def test_first_step_is_signed_lr(self) -> None:
        """Test bias correction makes the first update lr times the gradient sign."""
        params = _params(w=[1.0, -1.0, 0.5])
        state = AdamState(config=AdamConfig(lr=0.01))

        adam_step(params, {"w": np.array([3.0, -0.2, 1e-3])}, state)

        np.testing.assert_allclose(params["w"].data, [0.99, -0.99, 0.49], atol=1e-6)
        assert state.t == 1

    def test_reference_trajectory(self) -> None:
        """Test three steps against a direct evaluation of the update rule."""
        cfg = AdamConfig(lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
        params = _params(w=[0.0])
        state = AdamState(config=cfg)
        grads = [2.0, -1.0, 0.5]

        expected, m, v = 0.0, 0.0, 0.0
        for t, g in enumerate(grads, start=1):
            adam_step(params, {"w": np.array([g])}, state)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            expected -= 0.1 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)

        assert params["w"].data[0] == pytest.approx(expected, rel=1e-12)

    def test_constant_gradient_moves_by_lr(self) -> None:
        """Test a steady gradient settles into steps of size lr."""
        params = _params(w=[0.0, 0.0])
        state = AdamState(config=AdamConfig(lr=0.01))
        grad = np.array([0.5, -4.0])

        steps = []
        for _ in range(200):
            before = params["w"].data
            adam_step(params, {"w": grad}, state)
            steps.append(params["w"].data - before)

        np.testing.assert_allclose(np.abs(steps[-1]), 0.01, rtol=1e-6)
        np.testing.assert_array_equal(np.sign(steps[-1]), [-1.0, 1.0])
        np.testing.assert_allclose(params["w"].data, [-2.0, 2.0], rtol=1e-5)

    def test_missing_gradient_is_zero(self) -> None:
        """Test a parameter without gradient stays put on its first step."""
        params = _params(a=[1.0], b=[2.0])

        adam_step(params, {"a": np.array([1.0])}, AdamState())

        assert params["b"].data[0] == 2.0
        assert params["a"].data[0] < 1.0

    def test_new_arrays(self) -> None:
        """Test parameters are replaced rather than written in place."""
        params = _params(w=[1.0, 2.0])
        before = params["w"].data

        adam_step(params, {"w": np.array([1.0, 1.0])}, AdamState())

        assert params["w"].data is not before
        np.testing.assert_array_equal(before, [1.0, 2.0])

    def test_non_finite_gradient(self) -> None:
        """Test a NaN gradient aborts before any update."""
        params = _params(a=[1.0], b=[1.0])
        state = AdamState()

        with pytest.raises(NonFiniteError, match="parameter b"):
            adam_step(params, {"a": np.array([1.0]), "b": np.array([np.nan])}, state)

        assert params["a"].data[0] == 1.0
        assert state.t == 0

    def test_shape_mismatch(self) -> None:
        """Test a gradient of the wrong shape."""
        with pytest.raises(ShapeError, match="w"):
            adam_step(_params(w=[1.0, 2.0]), {"w": np.zeros(3)}, AdamState())

    def test_float32_preserved(self) -> None:
        """Test single-precision parameters stay single precision."""
        params = {"w": Tensor(np.ones(4, dtype=np.float32))}
        state = AdamState()

        adam_step(params, {"w": np.ones(4, dtype=np.float32)}, state)

        assert params["w"].dtype == np.float32
        assert state.m["w"].dtype == np.float32


class TestCheckGradients:
    """Tests for check_gradients."""

    def test_first_offender_named(self) -> None:
        """Test offenders are reported in name order."""
        grads = {"z": np.array([np.inf]), "a": np.array([np.nan]), "m": None}

        with pytest.raises(NonFiniteError, match="parameter a"):
            check_gradients(grads)

    def test_finite(self) -> None:
        """Test finite gradients pass."""
        check_gradients({"a": np.zeros(2), "b": None})
