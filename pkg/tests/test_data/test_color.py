"""Tests for colour conversion and depth normalization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aggfov.data.color import (
    FLAT_DEPTH,
    normalize_depth,
    rgb_to_yuv,
    to_byte_scale,
    yuv_to_rgb,
)

unit_images = arrays(
    np.float64,
    st.tuples(st.just(3), st.integers(1, 5), st.integers(1, 5)),
    elements=st.floats(0.0, 1.0, allow_nan=False),
)


class TestYuv:
    """Tests for rgb_to_yuv and yuv_to_rgb."""

    @given(unit_images)
    @settings(max_examples=50, deadline=None)
    def test_round_trip(self, rgb: np.ndarray) -> None:
        """Test RGB survives the trip through YUV."""
        np.testing.assert_allclose(yuv_to_rgb(rgb_to_yuv(rgb)), rgb, atol=1e-5)

    @given(unit_images)
    @settings(max_examples=50, deadline=None)
    def test_yuv_in_unit_range(self, rgb: np.ndarray) -> None:
        """Test rescaled YUV stays within [0, 1]."""
        yuv = rgb_to_yuv(rgb)

        assert yuv.min() >= -1e-12
        assert yuv.max() <= 1 + 1e-12

    def test_grey_is_centred(self) -> None:
        """Test grey maps to Y equal to the level and centred chroma."""
        yuv = rgb_to_yuv(np.full((3, 1, 1), 0.4))

        np.testing.assert_allclose(yuv[:, 0, 0], [0.4, 0.5, 0.5], atol=1e-12)

    def test_batched(self, rng: np.random.Generator) -> None:
        """Test (N, 3, H, W) input converts per image."""
        rgb = rng.uniform(0, 1, (2, 3, 4, 4))

        np.testing.assert_allclose(rgb_to_yuv(rgb)[1], rgb_to_yuv(rgb[1]))

    def test_clamps_out_of_gamut(self) -> None:
        """Test YUV outside the RGB gamut converts to clamped RGB."""
        rgb = yuv_to_rgb(np.array([1.0, 1.0, 1.0]).reshape(3, 1, 1))

        assert rgb.min() >= 0.0
        assert rgb.max() <= 1.0

    def test_dtype(self) -> None:
        """Test float32 stays float32 and integers become float32."""
        assert rgb_to_yuv(np.zeros((3, 1, 1), dtype=np.float32)).dtype == np.float32
        assert yuv_to_rgb(np.zeros((3, 1, 1), dtype=np.uint8)).dtype == np.float32

    def test_bad_shape(self) -> None:
        """Test a non channel-first array is rejected."""
        with pytest.raises(ValueError, match="expected"):
            rgb_to_yuv(np.zeros((4, 4, 3)))


class TestDepth:
    """Tests for normalize_depth and to_byte_scale."""

    def test_min_max(self) -> None:
        """Test the plane is stretched onto [0, 1]."""
        depth = normalize_depth(np.array([[2.0, 4.0], [3.0, 6.0]]))

        np.testing.assert_allclose(depth, [[0.0, 0.5], [0.25, 1.0]])
        assert depth.dtype == np.float32

    def test_flat(self) -> None:
        """Test a constant plane maps to 0.5 everywhere."""
        depth = normalize_depth(np.full((2, 3), 7.0))

        np.testing.assert_array_equal(depth, FLAT_DEPTH)

    def test_byte_scale(self) -> None:
        """Test the metric scale."""
        scaled = to_byte_scale(np.array([0.0, 0.5, 1.0]))
        np.testing.assert_allclose(scaled, [0, 127.5, 255])
