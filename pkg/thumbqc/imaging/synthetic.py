"""
Synthetic Thumbnail Generator

Seeded stand-in for real slide thumbnails, used by tests, smoke runs and the
latency benchmark. The two classes mimic the visual contrast between the
fixation types at thumbnail resolution:

- FFPE: saturated pink tissue with smooth, low-frequency texture.
- FS: paler, bluish tissue with high-frequency speckle and bright tearing
  streaks (freezing artefacts).

Roughly a third of the slides are emitted in portrait orientation so that the
orientation step of the pipeline is exercised.
"""

import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from scipy.ndimage import gaussian_filter

from thumbqc.imaging.raster import RasterImage, save_raster
from thumbqc.schemas.manifest import Label, ManifestRecord

logger = logging.getLogger(__name__)

FFPE_TISSUE = np.array([0.86, 0.52, 0.68], dtype=np.float64)
FS_TISSUE = np.array([0.72, 0.64, 0.86], dtype=np.float64)
PORTRAIT_PROBABILITY = 1.0 / 3.0


def _tissue_mask(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    field = gaussian_filter(rng.standard_normal((height, width)), sigma=min(height, width) / 6)
    field = (field - field.mean()) / (field.std() + 1e-12)
    return (field > -0.6).astype(np.float64)


def synthetic_thumbnail(
    label: Label,
    rng: np.random.Generator,
    height: int = 128,
    width: int = 256,
) -> RasterImage:
    """Generate one landscape thumbnail of the given class."""
    mask = _tissue_mask(rng, height, width)
    if label is Label.FFPE:
        texture = gaussian_filter(rng.standard_normal((height, width)), sigma=6.0)
        texture = 0.12 * texture / (np.abs(texture).max() + 1e-12)
        tissue = FFPE_TISSUE[None, None, :] + texture[:, :, None]
    else:
        speckle = 0.18 * rng.standard_normal((height, width))
        tissue = FS_TISSUE[None, None, :] + speckle[:, :, None]
        yy, xx = np.mgrid[0:height, 0:width]
        for _ in range(int(rng.integers(3, 7))):
            angle = rng.uniform(-0.4, 0.4)
            offset = rng.uniform(0, height)
            distance = np.abs(yy - offset - np.tan(angle) * (xx - width / 2))
            streak = distance < rng.uniform(0.6, 1.6)
            tissue[streak] = 0.97
    background = np.ones((height, width, 3), dtype=np.float64)
    data = mask[:, :, None] * tissue + (1.0 - mask[:, :, None]) * background
    return RasterImage(np.clip(data, 0.0, 1.0).astype(np.float32))


def write_synthetic_dataset(
    out_dir: Union[str, Path],
    n_per_class: int,
    seed: int,
    dataset: str = "synthetic",
    height: int = 128,
    width: int = 256,
    split: Optional[str] = None,
) -> List[ManifestRecord]:
    """Write ``2 * n_per_class`` PNG thumbnails and return their manifest records."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    records: List[ManifestRecord] = []
    for i in range(n_per_class):
        for label in (Label.FFPE, Label.FS):
            img = synthetic_thumbnail(label, rng, height, width)
            if rng.random() < PORTRAIT_PROBABILITY:
                img = RasterImage(np.ascontiguousarray(np.rot90(img.data, k=1)))
            slide_id = f"{dataset}-{label.value.lower()}-{i:04d}"
            path = out / f"{slide_id}.png"
            save_raster(img, path)
            records.append(
                ManifestRecord(slide_id=slide_id, path=str(path), label=label, dataset=dataset, split=split)
            )
    logger.info("Wrote %d synthetic thumbnails to %s", len(records), out)
    return records
