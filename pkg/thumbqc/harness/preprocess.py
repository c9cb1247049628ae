"""Export the canonical image and tile grid of each slide for visual inspection."""

import logging
from pathlib import Path
from typing import List, Sequence, Union

from thumbqc.core.errors import ThumbQCError
from thumbqc.imaging.geometry import ScaleConfig, canonicalize, resize_to_scale, tile
from thumbqc.imaging.raster import load_thumbnail, save_raster
from thumbqc.schemas.manifest import ManifestRecord
from thumbqc.schemas.reports import SlideError

logger = logging.getLogger(__name__)

CANONICAL_FILE = "canonical.png"


def export_slide(record: ManifestRecord, scale: ScaleConfig, out_dir: Union[str, Path]) -> Path:
    """Write ``<out>/<slide_id>/canonical.png`` and ``tile_<row>_<col>.png`` for each tile."""
    target = Path(out_dir) / record.slide_id
    target.mkdir(parents=True, exist_ok=True)
    canonical = canonicalize(load_thumbnail(record.path))
    save_raster(canonical, target / CANONICAL_FILE)
    batch = tile(resize_to_scale(canonical, scale), scale)
    for index, t in enumerate(batch.tiles):
        row, col = divmod(index, batch.grid_cols)
        save_raster(t, target / f"tile_{row}_{col}.png")
    return target


def export_slides(
    records: Sequence[ManifestRecord],
    scale: ScaleConfig,
    out_dir: Union[str, Path],
) -> List[SlideError]:
    """Export every slide; returns error records for the slides that failed."""
    errors: List[SlideError] = []
    for record in records:
        try:
            export_slide(record, scale, out_dir)
        except ThumbQCError as e:
            logger.warning("Skipping slide %s: %s", record.slide_id, e.message)
            errors.append(SlideError(slide_id=record.slide_id, path=record.path, error=e.error_code, message=e.message))
    logger.info("Exported %d slides at scale %s to %s", len(records) - len(errors), scale.name.value, out_dir)
    return errors
