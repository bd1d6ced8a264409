"""Tests for manifests, pairs, splitting and batches."""

from pathlib import Path

import numpy as np
import pytest

from aggfov.common.errors import DatasetError, DimensionError, ManifestNotFoundError
from aggfov.data.dataset import (
    DatasetManifest,
    ImagePair,
    ManifestEntry,
    load_pairs,
    make_batch,
    split,
)


def _pair(sample_id: str, size: tuple[int, int] = (16, 16), value: float = 0.5):
    return ImagePair(
        sample_id,
        np.full(size, value, dtype=np.float32),
        np.full((3,) + size, value, dtype=np.float32),
    )


class TestManifest:
    """Tests for DatasetManifest."""

    def test_read(self, tmp_path: Path) -> None:
        """Test comments and blank lines are skipped."""
        path = tmp_path / "m.tsv"
        path.write_text("# header\n\na/1.pgm\tb/1.ppm\n a/2.pgm \tb/2.ppm\n")

        manifest = DatasetManifest.read(path)

        assert manifest.root == tmp_path
        assert manifest.ids == ["a/1", "a/2"]
        assert manifest.entries[1] == ManifestEntry("a/2.pgm", "b/2.ppm")

    def test_write_read(self, tmp_path: Path) -> None:
        """Test a written manifest reads back with its header as a comment."""
        manifest = DatasetManifest(
            tmp_path,
            (ManifestEntry("d/0.pgm", "r/0.ppm"), ManifestEntry("d/1.pgm", "r/1.ppm")),
        )
        path = manifest.write(header="two pairs")

        assert path.read_text().startswith("# two pairs\n")
        assert DatasetManifest.read(path).entries == manifest.entries

    def test_missing(self, tmp_path: Path) -> None:
        """Test a missing manifest raises ManifestNotFoundError."""
        with pytest.raises(ManifestNotFoundError, match="not found"):
            DatasetManifest.read(tmp_path / "absent.tsv")

    def test_malformed_line(self, tmp_path: Path) -> None:
        """Test a line without a tab names its line number."""
        path = tmp_path / "m.tsv"
        path.write_text("a.pgm\tb.ppm\nonly-one-field\n")

        with pytest.raises(DatasetError, match=":2:"):
            DatasetManifest.read(path)

    def test_duplicate_ids(self, tmp_path: Path) -> None:
        """Test two entries with one depth stem are rejected."""
        path = tmp_path / "m.tsv"
        path.write_text("a.pgm\tb.ppm\na.pgm\tc.ppm\n")

        with pytest.raises(DatasetError, match="duplicate"):
            DatasetManifest.read(path)


class TestImagePair:
    """Tests for ImagePair."""

    def test_load(self, synth_pairs: list[ImagePair]) -> None:
        """Test loaded pairs are normalized and sized."""
        pair = synth_pairs[0]

        assert pair.id == "depth/00000"
        assert pair.shape == (32, 32)
        assert pair.depth.min() == 0.0
        assert pair.depth.max() == pytest.approx(1.0)
        assert pair.target_yuv.shape == (3, 32, 32)

    def test_target_rgb(self, synth_pairs: list[ImagePair]) -> None:
        """Test the RGB view matches the file within quantization."""
        rgb = synth_pairs[1].target_rgb

        assert rgb.shape == (3, 32, 32)
        np.testing.assert_allclose(rgb * 255, np.rint(rgb * 255), atol=1e-3)

    def test_size_not_divisible(self) -> None:
        """Test pairs must be divisible by 16."""
        with pytest.raises(DimensionError, match="width"):
            _pair("x", size=(16, 20))

    def test_target_mismatch(self) -> None:
        """Test a target of another size is rejected."""
        with pytest.raises(DatasetError, match="does not match"):
            ImagePair("x", np.zeros((16, 16)), np.zeros((3, 32, 16)))

    def test_missing_file(self, synth_manifest: DatasetManifest) -> None:
        """Test a missing image names the sample."""
        (synth_manifest.root / synth_manifest.entries[2].rgb).unlink()

        with pytest.raises(DatasetError, match="depth/00002"):
            load_pairs(synth_manifest)


class TestSplit:
    """Tests for split."""

    def test_partition(self, synth_manifest: DatasetManifest) -> None:
        """Test the split is a seeded partition of the manifest."""
        train, test = split(synth_manifest, 0.5, seed=1)

        assert len(train) == 3
        assert len(test) == 3
        assert sorted(train.ids + test.ids) == sorted(synth_manifest.ids)
        assert train.split == "train"
        assert test.split == "test"

    def test_seeded(self, synth_manifest: DatasetManifest) -> None:
        """Test the same seed gives the same split."""
        first = split(synth_manifest, 0.5, 4)[0]
        assert first.ids == split(synth_manifest, 0.5, 4)[0].ids

    def test_extremes(self, synth_manifest: DatasetManifest) -> None:
        """Test ratios 0 and 1."""
        assert len(split(synth_manifest, 0.0, 0)[0]) == 0
        assert len(split(synth_manifest, 1.0, 0)[1]) == 0

    def test_bad_ratio(self, synth_manifest: DatasetManifest) -> None:
        """Test a ratio outside [0, 1]."""
        with pytest.raises(ValueError, match="ratio"):
            split(synth_manifest, 1.5, 0)


class TestMakeBatch:
    """Tests for make_batch."""

    def test_stacks_in_order(self) -> None:
        """Test samples are stacked in index order with a channel axis."""
        pairs = [_pair("a", value=0.1), _pair("b", value=0.2), _pair("c", value=0.3)]

        depth, target = make_batch(pairs, [2, 0])

        assert depth.shape == (2, 1, 16, 16)
        assert target.shape == (2, 3, 16, 16)
        assert depth.data[0, 0, 0, 0] == pytest.approx(0.3)
        assert depth.dtype == np.float32

    def test_dtype(self) -> None:
        """Test the batch can be built in 64-bit."""
        depth, _ = make_batch([_pair("a")], [0], dtype=np.dtype(np.float64))

        assert depth.dtype == np.float64

    def test_empty(self) -> None:
        """Test an empty index list."""
        with pytest.raises(DatasetError, match="no samples"):
            make_batch([_pair("a")], [])

    def test_mixed_sizes(self) -> None:
        """Test pairs of different sizes cannot share a batch."""
        with pytest.raises(DatasetError, match="mixes"):
            make_batch([_pair("a"), _pair("b", size=(32, 16))], [0, 1])
