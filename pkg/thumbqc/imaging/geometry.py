"""
Thumbnail Geometry Pipeline

Deterministic, pure functions taking a raw thumbnail to backbone input:

    orient_landscape -> stretch_to_canonical (896 x 1792) -> resize_to_scale
    -> tile (224 x 224, row-major) -> normalize

All resampling goes through ``bilinear_resize``, which uses the half-pixel
centre convention ``src = (dst + 0.5) * in / out - 0.5`` with border
clamping (torch's ``align_corners=False`` bilinear kernel, no antialiasing).
Aspect ratio is deliberately not preserved by the canonical stretch.
"""

import enum
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from thumbqc.core.errors import InvalidInputError, PreconditionError
from thumbqc.imaging.raster import RasterImage

TILE_SIZE = 224
CANONICAL_HEIGHT = 896
CANONICAL_WIDTH = 1792
EXPORT_LONGEST_SIDE = 1920


class ScaleName(str, enum.Enum):
    XS = "XS"
    S = "S"
    M = "M"
    L = "L"


@dataclass(frozen=True)
class ScaleConfig:
    """Target resolution of a scale and its tile grid."""
    name: ScaleName
    target_height: int
    target_width: int
    grid_rows: int
    grid_cols: int

    def __post_init__(self) -> None:
        if self.target_height != self.grid_rows * TILE_SIZE or self.target_width != self.grid_cols * TILE_SIZE:
            raise InvalidInputError(f"scale {self.name} does not tile into {TILE_SIZE}px tiles")

    @property
    def n_tiles(self) -> int:
        return self.grid_rows * self.grid_cols


SCALES: Dict[ScaleName, ScaleConfig] = {
    ScaleName.XS: ScaleConfig(ScaleName.XS, 224, 224, 1, 1),
    ScaleName.S: ScaleConfig(ScaleName.S, 224, 448, 1, 2),
    ScaleName.M: ScaleConfig(ScaleName.M, 448, 896, 2, 4),
    ScaleName.L: ScaleConfig(ScaleName.L, 896, 1792, 4, 8),
}


def get_scale(name: "ScaleName | str") -> ScaleConfig:
    return SCALES[ScaleName(name)]


@dataclass(frozen=True)
class TileBatch:
    """Row-major tiles of one image plus the grid they came from."""
    tiles: Tuple[RasterImage, ...]
    grid_rows: int
    grid_cols: int

    def __post_init__(self) -> None:
        if len(self.tiles) != self.grid_rows * self.grid_cols:
            raise InvalidInputError(
                f"expected {self.grid_rows * self.grid_cols} tiles, got {len(self.tiles)}"
            )
        for t in self.tiles:
            if t.shape != (TILE_SIZE, TILE_SIZE):
                raise InvalidInputError(f"tile has shape {t.shape}, expected 224x224")

    def __len__(self) -> int:
        return len(self.tiles)


def _require_nonempty(img: RasterImage) -> None:
    if img.height == 0 or img.width == 0:
        raise InvalidInputError(f"image has a zero dimension: {img.height}x{img.width}")


def bilinear_resize(img: RasterImage, height: int, width: int) -> RasterImage:
    """Bilinear resample to ``height x width``; same-size requests return the input."""
    _require_nonempty(img)
    if height < 1 or width < 1:
        raise InvalidInputError(f"invalid target size {height}x{width}")
    if img.shape == (height, width):
        return img
    src = torch.from_numpy(img.data).to(torch.float64).permute(2, 0, 1).unsqueeze(0)
    out = F.interpolate(src, size=(height, width), mode="bilinear", align_corners=False)
    data = out.squeeze(0).permute(1, 2, 0).numpy()
    # Convex weights keep values in range up to float rounding
    data = np.clip(data, float(img.data.min()), float(img.data.max()))
    return RasterImage(np.ascontiguousarray(data, dtype=np.float32))


def orient_landscape(img: RasterImage) -> RasterImage:
    """Rotate portrait images 90 degrees clockwise; square and landscape pass through."""
    _require_nonempty(img)
    if img.is_landscape:
        return img
    # out[r, c] = in[H - 1 - c, r]
    return RasterImage(np.ascontiguousarray(np.rot90(img.data, k=-1)))


def stretch_to_canonical(img: RasterImage) -> RasterImage:
    """Anisotropic bilinear stretch of a landscape image to 896 x 1792."""
    _require_nonempty(img)
    if not img.is_landscape:
        raise PreconditionError(
            f"stretch_to_canonical expects a landscape image, got {img.height}x{img.width}",
            action="Call orient_landscape first",
        )
    return bilinear_resize(img, CANONICAL_HEIGHT, CANONICAL_WIDTH)


def resize_to_scale(img: RasterImage, scale: ScaleConfig) -> RasterImage:
    """Resize a canonical 896 x 1792 image to the scale's target size (L is the identity)."""
    if img.shape != (CANONICAL_HEIGHT, CANONICAL_WIDTH):
        raise PreconditionError(
            f"resize_to_scale expects a {CANONICAL_HEIGHT}x{CANONICAL_WIDTH} image, "
            f"got {img.height}x{img.width}",
            action="Call stretch_to_canonical first",
        )
    return bilinear_resize(img, scale.target_height, scale.target_width)


def tile(img: RasterImage, scale: ScaleConfig) -> TileBatch:
    """Split an image of the scale's target size into its non-overlapping tile grid."""
    if img.shape != (scale.target_height, scale.target_width):
        raise InvalidInputError(
            f"image is {img.height}x{img.width}, scale {scale.name.value} needs "
            f"{scale.target_height}x{scale.target_width}"
        )
    rows, cols = scale.grid_rows, scale.grid_cols
    blocks = img.data.reshape(rows, TILE_SIZE, cols, TILE_SIZE, 3).transpose(0, 2, 1, 3, 4)
    tiles = tuple(
        RasterImage(np.ascontiguousarray(blocks[r, c])) for r in range(rows) for c in range(cols)
    )
    return TileBatch(tiles=tiles, grid_rows=rows, grid_cols=cols)


def stitch(batch: TileBatch) -> RasterImage:
    """Reassemble a row-major tile grid; the exact inverse of ``tile``."""
    rows = [
        np.concatenate([t.data for t in batch.tiles[r * batch.grid_cols:(r + 1) * batch.grid_cols]], axis=1)
        for r in range(batch.grid_rows)
    ]
    return RasterImage(np.concatenate(rows, axis=0))


def normalize(img: RasterImage, mean: Sequence[float], std: Sequence[float]) -> np.ndarray:
    """Channel-first ``(3, H, W)`` array with ``out[c] = (in[c] - mean[c]) / std[c]``."""
    mean_arr = np.asarray(mean, dtype=np.float32).reshape(3, 1, 1)
    std_arr = np.asarray(std, dtype=np.float32).reshape(3, 1, 1)
    if mean_arr.size != 3 or std_arr.size != 3:
        raise InvalidInputError("mean and std need one value per channel")
    if (std_arr <= 0).any():
        raise InvalidInputError(f"std must be positive per channel, got {list(std)}")
    chw = img.data.transpose(2, 0, 1)
    return np.ascontiguousarray((chw - mean_arr) / std_arr, dtype=np.float32)


def fit_longest_side(img: RasterImage, longest: int = EXPORT_LONGEST_SIDE) -> RasterImage:
    """Downscale, preserving aspect ratio, so that max(H, W) == longest."""
    _require_nonempty(img)
    side = max(img.height, img.width)
    if side <= longest:
        return img
    ratio = longest / side
    height = longest if img.height == side else max(1, round(img.height * ratio))
    width = longest if img.width == side else max(1, round(img.width * ratio))
    return bilinear_resize(img, height, width)


def canonicalize(img: RasterImage) -> RasterImage:
    """orient_landscape followed by stretch_to_canonical."""
    return stretch_to_canonical(orient_landscape(img))


def preprocess_slide(
    img: RasterImage,
    scale: ScaleConfig,
    tiled: bool,
    mean: Sequence[float],
    std: Sequence[float],
) -> np.ndarray:
    """
    Full preprocessing of one thumbnail.

    Returns ``(n_tiles, 3, 224, 224)`` when ``tiled`` and ``(3, H, W)`` at the
    scale's resolution otherwise.
    """
    scaled = resize_to_scale(canonicalize(img), scale)
    if not tiled:
        return normalize(scaled, mean, std)
    tiles: List[np.ndarray] = [normalize(t, mean, std) for t in tile(scaled, scale).tiles]
    return np.stack(tiles, axis=0)
