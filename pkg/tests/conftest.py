"""Shared pytest fixtures for all tests."""

from pathlib import Path

import numpy as np
import pytest

from aggfov.autodiff.conv import set_num_threads
from aggfov.autodiff.tensor import set_debug
from aggfov.data.dataset import MANIFEST_NAME, DatasetManifest, ImagePair, load_pairs
from aggfov.data.synth import synth_generate


@pytest.fixture(autouse=True)
def reference_runtime():
    """Run every test single-threaded with the debug check off."""
    set_num_threads(1)
    set_debug(False)
    yield
    set_num_threads(1)
    set_debug(False)


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for test inputs."""
    return np.random.default_rng(1234)


@pytest.fixture
def synth_dir(tmp_path: Path) -> Path:
    """Small synthetic dataset: 6 pairs of 32x32."""
    root = tmp_path / "synth"
    synth_generate(seed=3, count=6, height=32, width=32, out_dir=root)
    return root


@pytest.fixture
def synth_manifest(synth_dir: Path) -> DatasetManifest:
    """Manifest of the small synthetic dataset."""
    return DatasetManifest.read(synth_dir / MANIFEST_NAME)


@pytest.fixture
def synth_pairs(synth_manifest: DatasetManifest) -> list[ImagePair]:
    """Loaded pairs of the small synthetic dataset."""
    return load_pairs(synth_manifest)
