"""Dataset manifests, image pairs, splitting and batch assembly.

A manifest is a UTF-8 text file with one ``<depth-relpath>\\t<rgb-relpath>``
entry per line; blank lines and lines starting with ``#`` are ignored.
Paths are relative to the manifest's directory.
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from aggfov.autodiff.tensor import DEFAULT_DTYPE, Tensor
from aggfov.common.errors import DatasetError, DimensionError, ManifestNotFoundError
from aggfov.data.color import normalize_depth, rgb_to_yuv, yuv_to_rgb
from aggfov.data.netpbm import load_pgm, load_ppm

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.tsv"
SPATIAL_DIVISOR = 16


@dataclass(frozen=True)
class ManifestEntry:
    """One depth/RGB file pair, relative to the manifest root."""

    depth: str
    rgb: str

    @property
    def id(self) -> str:
        """Stable sample id: the depth path without its extension."""
        return str(Path(self.depth).with_suffix(""))


@dataclass(frozen=True)
class DatasetManifest:
    """Ordered list of image pairs under a root directory."""

    root: Path
    entries: tuple[ManifestEntry, ...] = ()
    split: str = "all"

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for entry in self.entries:
            if entry.id in seen:
                raise DatasetError(f"duplicate sample id in manifest: {entry.id}")
            seen.add(entry.id)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> list[str]:
        """Sample ids in manifest order."""
        return [e.id for e in self.entries]

    def subset(self, indices: Iterable[int], split: str) -> "DatasetManifest":
        """Manifest restricted to ``indices`` (in the given order)."""
        entries = tuple(self.entries[i] for i in indices)
        return replace(self, entries=entries, split=split)

    @classmethod
    def read(cls, path: str | Path) -> "DatasetManifest":
        """Parse a manifest file.

        Raises:
            DatasetError: Missing file, malformed line or duplicate id
        """
        path = Path(path)
        if not path.is_file():
            raise ManifestNotFoundError(f"Manifest not found: {path}")
        entries = []
        for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2 or not all(f.strip() for f in fields):
                raise DatasetError(
                    f"{path}:{lineno}: expected '<depth>\\t<rgb>', got {raw!r}"
                )
            entries.append(ManifestEntry(fields[0].strip(), fields[1].strip()))
        return cls(root=path.parent, entries=tuple(entries))

    def write(
        self, path: Optional[str | Path] = None, header: Optional[str] = None
    ) -> Path:
        """Write the manifest, by default to ``<root>/manifest.tsv``."""
        path = Path(path) if path is not None else self.root / MANIFEST_NAME
        lines = [f"# {line}" for line in (header or "").splitlines()]
        lines += [f"{e.depth}\t{e.rgb}" for e in self.entries]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


@dataclass
class ImagePair:
    """Normalized depth plane and its YUV target, both in [0, 1]."""

    id: str
    depth: np.ndarray
    target_yuv: np.ndarray
    depth_path: Optional[Path] = None
    rgb_path: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.depth.ndim != 2:
            raise DatasetError(
                f"{self.id}: depth must be (H, W), got {self.depth.shape}"
            )
        if self.target_yuv.shape != (3,) + self.depth.shape:
            raise DatasetError(
                f"{self.id}: target {self.target_yuv.shape} does not match "
                f"depth {self.depth.shape}"
            )
        height, width = self.depth.shape
        if height % SPATIAL_DIVISOR:
            raise DimensionError("height", height, SPATIAL_DIVISOR)
        if width % SPATIAL_DIVISOR:
            raise DimensionError("width", width, SPATIAL_DIVISOR)

    @property
    def shape(self) -> tuple[int, int]:
        """(H, W)."""
        return (int(self.depth.shape[0]), int(self.depth.shape[1]))

    @property
    def target_rgb(self) -> np.ndarray:
        """Target converted back to RGB in [0, 1]."""
        return yuv_to_rgb(self.target_yuv)

    @classmethod
    def from_files(
        cls, sample_id: str, depth_path: Path, rgb_path: Path
    ) -> "ImagePair":
        """Load and normalize one pair from PGM/PPM files."""
        for p in (depth_path, rgb_path):
            if not p.is_file():
                raise DatasetError(f"{sample_id}: file not found: {p}")
        depth = normalize_depth(load_pgm(depth_path))
        target = rgb_to_yuv(load_ppm(rgb_path))
        if target.shape[1:] != depth.shape:
            raise DatasetError(
                f"{sample_id}: depth {depth.shape} and "
                f"rgb {target.shape[1:]} sizes differ"
            )
        return cls(sample_id, depth, target, depth_path, rgb_path)


def load_pairs(manifest: DatasetManifest) -> list[ImagePair]:
    """Load every pair of a manifest in order."""
    pairs = [
        ImagePair.from_files(e.id, manifest.root / e.depth, manifest.root / e.rgb)
        for e in manifest.entries
    ]
    logger.info("Loaded %d %s pairs from %s", len(pairs), manifest.split, manifest.root)
    return pairs


def split(
    manifest: DatasetManifest, ratio: float, seed: int
) -> tuple[DatasetManifest, DatasetManifest]:
    """Seeded shuffle, then the first ``round(ratio * n)`` entries train."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"split ratio must be within [0, 1], got {ratio}")
    order = np.random.default_rng(seed).permutation(len(manifest))
    n_train = int(round(ratio * len(manifest)))
    return (
        manifest.subset(order[:n_train].tolist(), "train"),
        manifest.subset(order[n_train:].tolist(), "test"),
    )


def make_batch(
    pairs: Sequence[ImagePair],
    indices: Sequence[int],
    dtype: Optional[np.dtype] = None,
) -> tuple[Tensor, Tensor]:
    """Stack pairs in index order into (N,1,H,W) depth and (N,3,H,W) targets.

    Raises:
        DatasetError: Empty index list or pairs of different sizes
    """
    if len(indices) == 0:
        raise DatasetError("cannot build a batch from no samples")
    chosen = [pairs[i] for i in indices]
    shapes = {p.shape for p in chosen}
    if len(shapes) > 1:
        raise DatasetError(f"batch mixes image sizes: {sorted(shapes)}")
    dtype = np.dtype(dtype or DEFAULT_DTYPE)
    depth = np.stack([p.depth for p in chosen])[:, None].astype(dtype)
    target = np.stack([p.target_yuv for p in chosen]).astype(dtype)
    return Tensor(depth, dtype=dtype), Tensor(target, dtype=dtype)
