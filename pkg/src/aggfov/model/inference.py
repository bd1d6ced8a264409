"""Eval-mode hallucination of RGB images from depth planes."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from aggfov.autodiff.tensor import Tensor, no_grad
from aggfov.common.errors import DatasetError
from aggfov.data.color import normalize_depth, yuv_to_rgb
from aggfov.data.dataset import MANIFEST_NAME, DatasetManifest
from aggfov.data.netpbm import load_pgm, save_ppm
from aggfov.model.network import HallucinationNet, forward

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InferenceJob:
    """One depth file and the PPM it turns into."""

    depth_path: Path
    output: Path


def hallucinate(net: HallucinationNet, depth: np.ndarray) -> np.ndarray:
    """Eval-mode forward of an (N, H, W) or (N, 1, H, W) depth batch.

    The linear head output is clamped to [0, 1] in YUV before conversion.

    Returns:
        RGB images (N, 3, H, W) in [0, 1]
    """
    batch = depth[:, None] if depth.ndim == 3 else depth
    with no_grad():
        out = forward(net, Tensor(batch, dtype=net.params.dtype), mode="eval")
    return yuv_to_rgb(np.clip(out.data, 0.0, 1.0))


def plan_jobs(inputs: Iterable[str | Path], out_dir: str | Path) -> list[InferenceJob]:
    """Expand PGM files, directories of PGMs and manifests into jobs.

    Files and directory members are written as ``<stem>.ppm``; manifest
    entries keep their sample id as relative path.

    Raises:
        DatasetError: Missing input or nothing to do
    """
    out = Path(out_dir)
    jobs: list[InferenceJob] = []
    for item in map(Path, inputs):
        if item.is_dir():
            manifest_path = item / MANIFEST_NAME
            if manifest_path.is_file():
                jobs += _manifest_jobs(manifest_path, out)
            else:
                jobs += [
                    InferenceJob(p, out / f"{p.stem}.ppm")
                    for p in sorted(item.glob("*.pgm"))
                ]
        elif item.suffix.lower() == ".pgm":
            if not item.is_file():
                raise DatasetError(f"Depth image not found: {item}")
            jobs.append(InferenceJob(item, out / f"{item.stem}.ppm"))
        else:
            jobs += _manifest_jobs(item, out)
    if not jobs:
        raise DatasetError("no depth images to process")
    return jobs


def _manifest_jobs(path: Path, out: Path) -> list[InferenceJob]:
    manifest = DatasetManifest.read(path)
    return [
        InferenceJob(manifest.root / e.depth, out / f"{e.id}.ppm")
        for e in manifest.entries
    ]


def run_inference(net: HallucinationNet, jobs: list[InferenceJob]) -> list[Path]:
    """Hallucinate every job one image at a time and write 8-bit PPMs."""
    written = []
    for job in jobs:
        depth = normalize_depth(load_pgm(job.depth_path))
        rgb = hallucinate(net, depth[None])[0]
        job.output.parent.mkdir(parents=True, exist_ok=True)
        save_ppm(job.output, rgb)
        logger.debug("Hallucinated %s -> %s", job.depth_path, job.output)
        written.append(job.output)
    logger.info("Wrote %d hallucinated images", len(written))
    return written
