"""Synthetic depth/RGB scenes whose colours need neighbourhood context.

Each scene is a background depth ramp with 3 to 8 axis-aligned rectangles
painted over it at distinct depths. Every region (background included) gets
a flat colour looked up in a per-dataset palette by two keys: the depth
bucket of the region itself and the depth bucket of its largest neighbouring
region. A network therefore has to look past the region border to predict
the colour.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from aggfov.common.errors import ConfigError
from aggfov.data.color import normalize_depth
from aggfov.data.dataset import (
    MANIFEST_NAME,
    SPATIAL_DIVISOR,
    DatasetManifest,
    ManifestEntry,
)
from aggfov.data.netpbm import save_pgm, save_ppm

logger = logging.getLogger(__name__)

DEPTH_BUCKETS = 6
MIN_RECTANGLES = 3
MAX_RECTANGLES = 8
DEPTH_DIR = "depth"
RGB_DIR = "rgb"


@dataclass
class SyntheticScene:
    """One generated scene before it is written to disk."""

    depth: np.ndarray
    rgb: np.ndarray
    labels: np.ndarray
    buckets: dict[int, int]
    neighbors: dict[int, int]


def make_palette(seed: int) -> np.ndarray:
    """Colour table indexed by (region bucket, neighbour bucket)."""
    rng = np.random.default_rng([seed, 0x9A1E77E])
    return rng.uniform(0.05, 0.95, size=(DEPTH_BUCKETS, DEPTH_BUCKETS, 3))


def depth_bucket(depth: float) -> int:
    """Bucket index of a normalized depth value."""
    return int(min(DEPTH_BUCKETS - 1, max(0, np.floor(depth * DEPTH_BUCKETS))))


def region_color(palette: np.ndarray, bucket: int, neighbor_bucket: int) -> np.ndarray:
    """RGB colour of a region from its own and its largest neighbour's bucket."""
    return np.asarray(palette[bucket, neighbor_bucket], dtype=np.float64)


def largest_neighbors(labels: np.ndarray) -> dict[int, int]:
    """Map each region to its 4-connected neighbour with the largest area.

    Ties go to the lower label; a region without neighbours maps to itself.
    """
    areas = np.bincount(labels.ravel())
    pairs = set()
    for a, b in (
        (labels[:, 1:], labels[:, :-1]),
        (labels[1:, :], labels[:-1, :]),
    ):
        border = a != b
        for u, v in zip(a[border].tolist(), b[border].tolist()):
            pairs.add((u, v))
            pairs.add((v, u))
    result = {}
    for region in np.unique(labels).tolist():
        candidates = sorted(v for u, v in pairs if u == region)
        if not candidates:
            result[region] = region
            continue
        result[region] = max(candidates, key=lambda r: (areas[r], -r))
    return result


def generate_scene(
    rng: np.random.Generator, palette: np.ndarray, height: int, width: int
) -> SyntheticScene:
    """Draw one scene from ``rng``."""
    ys = np.linspace(0.0, 1.0, height)[:, None]
    xs = np.linspace(0.0, 1.0, width)[None, :]
    base = rng.uniform(0.55, 0.75)
    slope_x, slope_y = rng.uniform(-0.15, 0.15, size=2)
    raw = np.broadcast_to(base + slope_x * xs + slope_y * ys, (height, width)).copy()
    labels = np.zeros((height, width), dtype=np.int64)

    count = int(rng.integers(MIN_RECTANGLES, MAX_RECTANGLES + 1))
    depths = rng.uniform(0.0, 1.0, size=count)
    for i in range(count):
        h = int(rng.integers(max(2, height // 8), max(3, height // 2) + 1))
        w = int(rng.integers(max(2, width // 8), max(3, width // 2) + 1))
        top = int(rng.integers(0, height - h + 1))
        left = int(rng.integers(0, width - w + 1))
        raw[top : top + h, left : left + w] = depths[i]
        labels[top : top + h, left : left + w] = i + 1

    # buckets are taken on the normalized plane the loader will see
    depth = normalize_depth(raw).astype(np.float64)
    present = np.unique(labels).tolist()
    buckets = {r: depth_bucket(float(depth[labels == r].mean())) for r in present}
    neighbors = largest_neighbors(labels)

    rgb = np.zeros((3, height, width))
    for region in present:
        color = region_color(palette, buckets[region], buckets[neighbors[region]])
        rgb[:, labels == region] = color[:, None]
    return SyntheticScene(depth, rgb, labels, buckets, neighbors)


def synth_generate(
    seed: int, count: int, height: int, width: int, out_dir: str | Path
) -> DatasetManifest:
    """Write ``count`` scenes as 16-bit PGM / 8-bit PPM pairs plus a manifest.

    Output is a pure function of the arguments: the same call produces
    byte-identical files.

    Raises:
        ConfigError: Height or width not divisible by 16 (nothing written),
            or a non-positive count
    """
    if height <= 0 or height % SPATIAL_DIVISOR:
        raise ConfigError(f"height {height} is not divisible by {SPATIAL_DIVISOR}")
    if width <= 0 or width % SPATIAL_DIVISOR:
        raise ConfigError(f"width {width} is not divisible by {SPATIAL_DIVISOR}")
    if count <= 0:
        raise ConfigError(f"count must be positive, got {count}")

    root = Path(out_dir)
    (root / DEPTH_DIR).mkdir(parents=True, exist_ok=True)
    (root / RGB_DIR).mkdir(parents=True, exist_ok=True)

    palette = make_palette(seed)
    entries = []
    for index in range(count):
        rng = np.random.default_rng([seed, index])
        scene = generate_scene(rng, palette, height, width)
        name = f"{index:05d}"
        entry = ManifestEntry(f"{DEPTH_DIR}/{name}.pgm", f"{RGB_DIR}/{name}.ppm")
        save_pgm(root / entry.depth, scene.depth, bits=16)
        save_ppm(root / entry.rgb, scene.rgb)
        entries.append(entry)

    manifest = DatasetManifest(root=root, entries=tuple(entries))
    manifest.write(
        root / MANIFEST_NAME,
        header=f"synthetic scenes seed={seed} count={count} size={height}x{width}",
    )
    logger.info(f"Generated {count} synthetic pairs ({height}x{width}) in {root}")
    return manifest
