"""
Single-Threaded Latency Benchmark

Times preprocessing and the forward pass of each model on one fixed, seeded
synthetic thumbnail with torch pinned to a single thread. Warmup passes are
run first and left out of the statistics; every timed pass is reported raw
alongside its median and 95th percentile.
"""

import contextlib
import logging
import time
from typing import Iterator, List, Optional, Sequence

import numpy as np
import torch

from thumbqc.backbone.config import get_backbone_preset
from thumbqc.core.errors import InvalidInputError
from thumbqc.heads.classifier import HEAD_PRESETS
from thumbqc.heads.model import FixationModel, ModelSpec
from thumbqc.imaging.geometry import ScaleName
from thumbqc.imaging.raster import RasterImage
from thumbqc.imaging.synthetic import synthetic_thumbnail
from thumbqc.schemas.approach import Approach
from thumbqc.schemas.manifest import Label
from thumbqc.schemas.reports import BenchEntry, BenchReport, LatencyStats

logger = logging.getLogger(__name__)

BENCH_THUMBNAIL_SHAPE = (384, 768)


@contextlib.contextmanager
def single_thread() -> Iterator[int]:
    """Pin torch intra-op parallelism to one thread; yields the active thread count."""
    previous = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        yield torch.get_num_threads()
    finally:
        torch.set_num_threads(previous)


def bench_thumbnail(seed: int = 0) -> RasterImage:
    height, width = BENCH_THUMBNAIL_SHAPE
    return synthetic_thumbnail(Label.FFPE, np.random.default_rng(seed), height, width)


def bench_model(
    model: FixationModel,
    thumbnail: RasterImage,
    iterations: int = 20,
    warmup: int = 5,
    backbone: str = "custom",
) -> BenchEntry:
    if iterations < 1:
        raise InvalidInputError(f"iterations must be >= 1, got {iterations}")
    spec = model.spec
    model.eval()
    pre_ms: List[float] = []
    fwd_ms: List[float] = []
    with single_thread() as threads, torch.inference_mode():
        for i in range(warmup + iterations):
            t0 = time.perf_counter()
            inputs = torch.from_numpy(spec.preprocess(thumbnail)).unsqueeze(0)
            t1 = time.perf_counter()
            model(inputs)
            t2 = time.perf_counter()
            if i >= warmup:
                pre_ms.append((t1 - t0) * 1000.0)
                fwd_ms.append((t2 - t1) * 1000.0)

    total = [p + f for p, f in zip(pre_ms, fwd_ms)]
    entry = BenchEntry(
        approach=spec.approach,
        scale=spec.scale,
        backbone=backbone,
        n_tiles=spec.scale_config.n_tiles if spec.approach.tiled else 1,
        warmup=warmup,
        iterations=iterations,
        threads=threads,
        single_threaded=threads == 1,
        preprocess=LatencyStats.of(pre_ms),
        forward=LatencyStats.of(fwd_ms),
        total=LatencyStats.of(total),
    )
    logger.info(
        "%s/%s on %s: median %.2f ms (preprocess %.2f, forward %.2f), p95 %.2f ms",
        spec.approach.value, spec.scale.value, backbone,
        entry.total.median_ms, entry.preprocess.median_ms, entry.forward.median_ms, entry.total.p95_ms,
    )
    return entry


def preset_model(
    approach: Approach,
    backbone: str = "desk",
    scale: Optional[ScaleName] = None,
    seed: int = 0,
) -> FixationModel:
    """Seeded randomly initialised model on a named backbone preset with its head preset."""
    if backbone not in HEAD_PRESETS:
        raise InvalidInputError(
            f"unknown backbone preset {backbone!r}",
            action=f"Choose from {sorted(HEAD_PRESETS)}",
        )
    spec = ModelSpec.create(
        approach, get_backbone_preset(backbone), HEAD_PRESETS[backbone], scale=scale, backbone_name=backbone
    )
    return FixationModel(spec, seed=seed).eval()


def run_bench(
    approaches: Sequence[Approach] = tuple(Approach),
    iterations: int = 20,
    warmup: int = 5,
    seed: int = 0,
    model: Optional[FixationModel] = None,
    backbones: Sequence[str] = ("desk",),
) -> BenchReport:
    """Bench ``model`` if given, otherwise every approach on every backbone preset."""
    thumbnail = bench_thumbnail(seed)
    if model is not None:
        entries = [bench_model(model, thumbnail, iterations, warmup, backbone=model.spec.backbone_name)]
    else:
        entries = [
            bench_model(preset_model(approach, backbone, seed=seed), thumbnail, iterations, warmup, backbone=backbone)
            for backbone in backbones
            for approach in approaches
        ]
    return BenchReport(entries=entries, torch_version=torch.__version__)
