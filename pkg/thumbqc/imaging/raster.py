"""
Raster Images and Thumbnail Decoding

RasterImage is the unit every geometry operation works on: an ``(H, W, 3)``
float32 array of intensities in [0, 1], row-major and channel-interleaved.

Thumbnails arrive as PNG or binary PPM (P6) files exported upstream from the
WSI container (the auxiliary thumbnail, or the lowest pyramid level fitted so
its longest side is 1,920 px, see ``fit_longest_side``). JPEG and WSI
containers are never opened here.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from thumbqc.core.errors import InvalidInputError

logger = logging.getLogger(__name__)

SUPPORTED_FORMATS = ("PNG", "PPM")
PathLike = Union[str, Path]


@dataclass(frozen=True)
class RasterImage:
    """Three-channel raster with intensities in [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = self.data
        if data.ndim != 3 or data.shape[2] != 3:
            raise InvalidInputError(
                f"raster must have shape (H, W, 3), got {tuple(data.shape)}"
            )
        if data.dtype != np.float32:
            object.__setattr__(self, "data", data.astype(np.float32))
            data = self.data
        if data.size and (not np.isfinite(data).all() or data.min() < 0.0 or data.max() > 1.0):
            raise InvalidInputError("raster intensities must be finite and within [0, 1]")

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return 3

    @property
    def shape(self) -> tuple[int, int]:
        """(height, width)"""
        return self.height, self.width

    @property
    def is_landscape(self) -> bool:
        return self.width >= self.height

    @classmethod
    def constant(cls, height: int, width: int, value: float) -> "RasterImage":
        return cls(np.full((height, width, 3), value, dtype=np.float32))

    def to_uint8(self) -> np.ndarray:
        return np.clip(np.rint(self.data * 255.0), 0, 255).astype(np.uint8)


def load_thumbnail(path: PathLike) -> RasterImage:
    """
    Decode a PNG or PPM thumbnail into a RasterImage.

    8-bit sources are divided by 255, 16-bit greyscale sources (modes "I" and
    "I;16*") by 65535. Any decoding failure, including images over Pillow's
    decompression-bomb limit, is reported as InvalidInputError so batch
    callers can record it per slide.
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            if img.format not in SUPPORTED_FORMATS:
                raise InvalidInputError(
                    f"unsupported thumbnail format {img.format!r} for {path.name}",
                    action="Convert thumbnails to PNG or PPM upstream",
                )
            if img.mode == "I" or img.mode.startswith("I;16"):
                grey = np.clip(np.asarray(img, dtype=np.float32) / 65535.0, 0.0, 1.0)
                data = np.repeat(grey[:, :, None], 3, axis=2)
            else:
                data = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    except (UnidentifiedImageError, Image.DecompressionBombError, OSError, SyntaxError) as e:
        logger.debug("Failed to decode %s: %s", path, e)
        raise InvalidInputError(f"cannot decode thumbnail {path.name}: {e}", path=str(path))
    return RasterImage(data)


def save_raster(img: RasterImage, path: PathLike) -> None:
    """Write an 8-bit PNG."""
    Image.fromarray(img.to_uint8()).save(Path(path), format="PNG")
