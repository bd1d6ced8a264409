"""BT.601 RGB <-> YUV conversion rescaled to [0, 1], and depth normalization.

Channel-first arrays: ``rgb`` and ``yuv`` are (3, H, W) or batched
(N, 3, H, W). Y lies in [0, 1] already; U in [-0.436, 0.436] and V in
[-0.615, 0.615] are mapped linearly onto [0, 1].
"""

import numpy as np

KR, KG, KB = 0.299, 0.587, 0.114
U_SCALE = 0.492
V_SCALE = 0.877
U_MAX = 0.436
V_MAX = 0.615

# plane value for a depth map without any range
FLAT_DEPTH = 0.5


def _channels(image: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if image.ndim not in (3, 4) or image.shape[-3] != 3:
        raise ValueError(f"expected (3, H, W) or (N, 3, H, W), got shape {image.shape}")
    axis = image.ndim - 3
    a, b, c = np.split(image, 3, axis=axis)
    return a, b, c


def _output_dtype(image: np.ndarray) -> np.dtype:
    dtype = np.asarray(image).dtype
    return dtype if np.issubdtype(dtype, np.floating) else np.dtype(np.float32)


def rgb_to_yuv(rgb: np.ndarray) -> np.ndarray:
    """Convert RGB in [0, 1] to YUV with every channel rescaled to [0, 1]."""
    r, g, b = _channels(np.asarray(rgb, dtype=np.float64))
    y = KR * r + KG * g + KB * b
    u = U_SCALE * (b - y)
    v = V_SCALE * (r - y)
    yuv = np.concatenate(
        [y, (u + U_MAX) / (2 * U_MAX), (v + V_MAX) / (2 * V_MAX)], axis=rgb.ndim - 3
    )
    return yuv.astype(_output_dtype(rgb))


def yuv_to_rgb(yuv: np.ndarray) -> np.ndarray:
    """Invert :func:`rgb_to_yuv` and clamp the result to [0, 1]."""
    y, u_scaled, v_scaled = _channels(np.asarray(yuv, dtype=np.float64))
    u = u_scaled * (2 * U_MAX) - U_MAX
    v = v_scaled * (2 * V_MAX) - V_MAX
    r = y + v / V_SCALE
    b = y + u / U_SCALE
    g = (y - KR * r - KB * b) / KG
    rgb = np.clip(np.concatenate([r, g, b], axis=yuv.ndim - 3), 0.0, 1.0)
    return rgb.astype(_output_dtype(yuv))


def normalize_depth(depth: np.ndarray) -> np.ndarray:
    """Min-max scale one depth plane to [0, 1]; a constant plane maps to 0.5."""
    plane = np.asarray(depth, dtype=np.float64)
    lo, hi = float(plane.min()), float(plane.max())
    if hi <= lo:
        return np.full(plane.shape, FLAT_DEPTH, dtype=np.float32)
    return ((plane - lo) / (hi - lo)).astype(np.float32)


def to_byte_scale(image: np.ndarray) -> np.ndarray:
    """[0, 1] reals to the 0-255 scale the pixel metric is reported in."""
    return np.asarray(image, dtype=np.float64) * 255.0
