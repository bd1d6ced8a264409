"""Evaluation: hallucinate every test pair and report the pixel metric.

Predictions are clamped to [0, 1] in YUV, converted to RGB and compared with
the target RGB on the 0-255 scale. Optional baselines score naive stand-ins
on the same pairs: the mean training target and the depth plane as grey.
"""

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from aggfov.common.errors import DatasetError
from aggfov.data.color import to_byte_scale
from aggfov.data.dataset import ImagePair
from aggfov.model.inference import hallucinate
from aggfov.model.network import HallucinationNet
from aggfov.training.objective import mean_abs_pixel_diff

logger = logging.getLogger(__name__)

REPORT_NAME = "report.json"


@dataclass
class EvalReport:
    """Aggregate and per-image mean absolute pixel difference."""

    mapd: float
    per_image: dict[str, float]
    baselines: dict[str, float] = field(default_factory=dict)
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        return {
            "mapd": self.mapd,
            "count": len(self.per_image),
            "per_image": self.per_image,
            "baselines": self.baselines,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EvalReport":
        """Create from dictionary."""
        return cls(
            mapd=float(data.get("mapd", 0.0)),
            per_image={k: float(v) for k, v in data.get("per_image", {}).items()},
            baselines={k: float(v) for k, v in data.get("baselines", {}).items()},
            timestamp=data.get("timestamp", ""),
        )

    def write(self, path: str | Path) -> Path:
        """Write the report as JSON."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return path


def score_predictions(
    predictions_rgb: Sequence[np.ndarray], pairs: Sequence[ImagePair]
) -> tuple[float, dict[str, float]]:
    """MAPD of RGB predictions in [0, 1] against the pairs' targets."""
    hal = [to_byte_scale(p) for p in predictions_rgb]
    gt = [to_byte_scale(p.target_rgb) for p in pairs]
    per_image = {
        pair.id: mean_abs_pixel_diff([h], [g]) for pair, h, g in zip(pairs, hal, gt)
    }
    return mean_abs_pixel_diff(hal, gt), per_image


def mean_target_image(pairs: Sequence[ImagePair]) -> np.ndarray:
    """Pixelwise mean RGB target over a set of pairs."""
    if not pairs:
        raise DatasetError("cannot average an empty set of targets")
    return np.mean([p.target_rgb for p in pairs], axis=0)


def baseline_scores(
    pairs: Sequence[ImagePair], mean_image: Optional[np.ndarray] = None
) -> dict[str, float]:
    """MAPD of the naive substitutes on ``pairs``."""
    scores = {
        "depth_as_gray": score_predictions(
            [np.repeat(p.depth[None], 3, axis=0) for p in pairs], pairs
        )[0]
    }
    if mean_image is not None:
        shapes = {p.shape for p in pairs}
        if shapes == {tuple(mean_image.shape[1:])}:
            predictions = [mean_image] * len(pairs)
            scores["mean_image"] = score_predictions(predictions, pairs)[0]
        else:
            logger.warning("Skipping mean-image baseline: image sizes differ")
    return scores


def evaluate(
    net: HallucinationNet,
    pairs: Sequence[ImagePair],
    train_pairs: Optional[Sequence[ImagePair]] = None,
    batch_size: int = 1,
) -> EvalReport:
    """Score the network on ``pairs``.

    Args:
        net: Network, evaluated with running batch-norm statistics
        pairs: Test pairs
        train_pairs: When given, adds the mean-training-image baseline
        batch_size: Pairs per forward pass

    Raises:
        DatasetError: Empty test set
    """
    if not pairs:
        raise DatasetError("test set is empty")
    predictions: list[np.ndarray] = []
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start : start + batch_size]
        shapes = {p.shape for p in chunk}
        if len(shapes) > 1:
            # mixed sizes fall back to one forward per image
            predictions += [hallucinate(net, p.depth[None])[0] for p in chunk]
            continue
        predictions += list(hallucinate(net, np.stack([p.depth for p in chunk])))

    mapd, per_image = score_predictions(predictions, pairs)
    mean_image = mean_target_image(train_pairs) if train_pairs else None
    report = EvalReport(mapd, per_image, baseline_scores(pairs, mean_image))
    logger.info(
        "Evaluated %d pairs: MAPD %.4f (baselines: %s)",
        len(pairs),
        mapd,
        ", ".join(f"{k} {v:.4f}" for k, v in report.baselines.items()) or "none",
    )
    return report
