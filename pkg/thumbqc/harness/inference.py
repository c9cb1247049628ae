"""
Batch Inference

Classifies slides in parallel across a thread pool. Each slide is handled
sequentially (load, preprocess, forward); results come back in input order
whatever the thread count, and a slide that cannot be read becomes an error
record instead of aborting the batch.
"""

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Union

from thumbqc.core.errors import ConfigurationError, EmptyInputError, InvalidInputError, ThumbQCError
from thumbqc.heads.model import FixationModel
from thumbqc.imaging.raster import load_thumbnail
from thumbqc.schemas.manifest import Label, ManifestRecord
from thumbqc.schemas.reports import SlideError, SlideVerdict
from thumbqc.training.loss import PROBABILITY_CLAMP
from thumbqc.training.splits import read_manifest

logger = logging.getLogger(__name__)

THUMBNAIL_SUFFIXES = (".png", ".ppm")
DECISION_THRESHOLD = 0.5

SlideResult = Union[SlideVerdict, SlideError]


def records_from_directory(directory: Union[str, Path]) -> List[ManifestRecord]:
    """Every PNG/PPM file in ``directory`` sorted by name; slide id is the file stem."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InvalidInputError(f"input directory {directory} does not exist")
    files = sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in THUMBNAIL_SUFFIXES)
    return [ManifestRecord(slide_id=p.stem, path=str(p)) for p in files]


def collect_inputs(
    manifest: Optional[Union[str, Path]] = None,
    directory: Optional[Union[str, Path]] = None,
) -> List[ManifestRecord]:
    if (manifest is None) == (directory is None):
        raise ConfigurationError("pass exactly one of --manifest or --input")
    records = read_manifest(manifest).records if manifest is not None else records_from_directory(directory)
    if not records:
        raise EmptyInputError("no slides to process", action="Check the manifest or input directory")
    return records


def classify_slide(model: FixationModel, record: ManifestRecord) -> SlideResult:
    start = time.perf_counter()
    try:
        inputs = model.spec.preprocess(load_thumbnail(record.path))
        probability = model.predict_proba(inputs)
    except ThumbQCError as e:
        logger.warning("Skipping slide %s: %s", record.slide_id, e.message)
        return SlideError(slide_id=record.slide_id, path=record.path, error=e.error_code, message=e.message)
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    probability = min(max(probability, PROBABILITY_CLAMP), 1.0 - PROBABILITY_CLAMP)
    return SlideVerdict(
        slide_id=record.slide_id,
        probability_ffpe=probability,
        predicted_label=Label.FFPE if probability >= DECISION_THRESHOLD else Label.FS,
        approach=model.spec.approach,
        scale=model.spec.scale,
        inference_ms=max(elapsed_ms, 1e-6),
    )


def infer_slides(
    model: FixationModel,
    records: Sequence[ManifestRecord],
    threads: Optional[int] = None,
) -> List[SlideResult]:
    """One result per record, in record order."""
    if not records:
        raise EmptyInputError("no slides to process")
    model.eval()
    workers = threads or os.cpu_count() or 1
    if workers == 1:
        results = [classify_slide(model, r) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: classify_slide(model, r), records))
    failed = sum(isinstance(r, SlideError) for r in results)
    logger.info("Classified %d slides (%d errors) with %d workers", len(results) - failed, failed, workers)
    return results


def write_results(results: Sequence[SlideResult], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for result in results:
            fh.write(json.dumps(result.model_dump(mode="json")) + "\n")
