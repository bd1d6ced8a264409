"""Tests for the synthetic scene generator."""

from pathlib import Path

import numpy as np
import pytest

from aggfov.common.errors import ConfigError
from aggfov.data.synth import (
    DEPTH_BUCKETS,
    depth_bucket,
    generate_scene,
    largest_neighbors,
    make_palette,
    region_color,
    synth_generate,
)


def _tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestHelpers:
    """Tests for buckets, palettes and neighbourhoods."""

    @pytest.mark.parametrize(
        "depth,bucket", [(0.0, 0), (0.17, 1), (0.5, 3), (0.99, 5), (1.0, 5), (-0.1, 0)]
    )
    def test_depth_bucket(self, depth: float, bucket: int) -> None:
        """Test depth values map to one of the buckets."""
        assert depth_bucket(depth) == bucket

    def test_palette(self) -> None:
        """Test the palette shape and its seed dependence."""
        palette = make_palette(1)

        assert palette.shape == (DEPTH_BUCKETS, DEPTH_BUCKETS, 3)
        np.testing.assert_array_equal(palette, make_palette(1))
        assert not np.array_equal(palette, make_palette(2))
        np.testing.assert_array_equal(region_color(palette, 2, 4), palette[2, 4])

    def test_largest_neighbors(self) -> None:
        """Test each region points at its biggest touching region."""
        labels = np.array(
            [
                [0, 0, 0, 0],
                [0, 1, 1, 0],
                [0, 1, 1, 2],
                [0, 0, 0, 2],
            ]
        )

        assert largest_neighbors(labels) == {0: 1, 1: 0, 2: 0}

    def test_single_region(self) -> None:
        """Test a region with no neighbours maps to itself."""
        assert largest_neighbors(np.zeros((3, 3), dtype=np.int64)) == {0: 0}


class TestGenerateScene:
    """Tests for generate_scene."""

    def test_colours_follow_regions(self) -> None:
        """Test every region is painted with its palette colour."""
        palette = make_palette(0)
        scene = generate_scene(np.random.default_rng(5), palette, 32, 48)

        assert scene.depth.shape == (32, 48)
        assert scene.rgb.shape == (3, 32, 48)
        for region, bucket in scene.buckets.items():
            expected = palette[bucket, scene.buckets[scene.neighbors[region]]]
            mask = scene.labels == region
            expected_rgb = expected[:, None] * np.ones(mask.sum())
            np.testing.assert_allclose(scene.rgb[:, mask], expected_rgb)

    def test_depth_range(self) -> None:
        """Test the depth plane spans [0, 1]."""
        scene = generate_scene(np.random.default_rng(6), make_palette(0), 16, 16)

        assert scene.depth.min() == 0.0
        assert scene.depth.max() == pytest.approx(1.0)


class TestSynthGenerate:
    """Tests for synth_generate."""

    def test_layout(self, synth_dir: Path) -> None:
        """Test files and manifest are written."""
        lines = (synth_dir / "manifest.tsv").read_text().splitlines()

        assert lines[0].startswith("# synthetic scenes seed=3")
        assert lines[1] == "depth/00000.pgm\trgb/00000.ppm"
        assert len(lines) == 7
        depth = (synth_dir / "depth" / "00005.pgm").read_bytes()
        rgb = (synth_dir / "rgb" / "00005.ppm").read_bytes()
        assert depth.startswith(b"P5\n32 32\n65535\n")
        assert rgb.startswith(b"P6\n32 32\n255\n")

    def test_byte_identical(self, tmp_path: Path) -> None:
        """Test the same arguments write the same bytes."""
        synth_generate(seed=9, count=3, height=16, width=32, out_dir=tmp_path / "a")
        synth_generate(seed=9, count=3, height=16, width=32, out_dir=tmp_path / "b")

        assert _tree_bytes(tmp_path / "a") == _tree_bytes(tmp_path / "b")

    def test_seed_changes_output(self, tmp_path: Path) -> None:
        """Test another seed writes other scenes."""
        synth_generate(seed=1, count=1, height=16, width=16, out_dir=tmp_path / "a")
        synth_generate(seed=2, count=1, height=16, width=16, out_dir=tmp_path / "b")

        assert _tree_bytes(tmp_path / "a") != _tree_bytes(tmp_path / "b")

    def test_prefix_stable(self, tmp_path: Path) -> None:
        """Test scene i does not depend on the total count."""
        synth_generate(seed=4, count=2, height=16, width=16, out_dir=tmp_path / "a")
        synth_generate(seed=4, count=4, height=16, width=16, out_dir=tmp_path / "b")

        a = (tmp_path / "a" / "rgb" / "00001.ppm").read_bytes()
        assert a == (tmp_path / "b" / "rgb" / "00001.ppm").read_bytes()

    def test_bad_height_writes_nothing(self, tmp_path: Path) -> None:
        """Test an invalid height fails before touching the disk."""
        with pytest.raises(ConfigError, match="height 100"):
            synth_generate(
                seed=0, count=1, height=100, width=64, out_dir=tmp_path / "x"
            )

        assert not (tmp_path / "x").exists()

    def test_bad_count(self, tmp_path: Path) -> None:
        """Test a non-positive count."""
        with pytest.raises(ConfigError, match="count"):
            synth_generate(seed=0, count=0, height=16, width=16, out_dir=tmp_path)
