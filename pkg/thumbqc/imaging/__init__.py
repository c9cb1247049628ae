from thumbqc.imaging.geometry import (  # noqa: F401
    CANONICAL_HEIGHT,
    CANONICAL_WIDTH,
    SCALES,
    TILE_SIZE,
    ScaleConfig,
    ScaleName,
    TileBatch,
    bilinear_resize,
    canonicalize,
    fit_longest_side,
    get_scale,
    normalize,
    orient_landscape,
    preprocess_slide,
    resize_to_scale,
    stitch,
    stretch_to_canonical,
    tile,
)
from thumbqc.imaging.raster import RasterImage, load_thumbnail, save_raster  # noqa: F401
from thumbqc.imaging.synthetic import synthetic_thumbnail, write_synthetic_dataset  # noqa: F401
