"""
Per-Dataset Evaluation

Scores every labelled slide of a manifest and reports accuracy, F1 and AUROC
per dataset, in order of first appearance. With ``by_scanner`` each dataset is
further split by the manifest's scanner column (missing scanners are grouped
as "unknown"). A group with a single class gets a row whose AUROC is marked
undefined.
"""

import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from thumbqc.core.errors import EmptyInputError, InvalidInputError
from thumbqc.harness.inference import infer_slides
from thumbqc.heads.model import FixationModel
from thumbqc.metrics import MetricsReport, ScoredSample, evaluate, write_report_csv, write_report_json
from thumbqc.schemas.manifest import Manifest, ManifestRecord, Split
from thumbqc.schemas.reports import SlideVerdict

logger = logging.getLogger(__name__)

UNKNOWN_SCANNER = "unknown"


def group_reports(
    records: Sequence[ManifestRecord],
    scores: Dict[str, float],
    threshold: float = 0.5,
    by_scanner: bool = False,
) -> List[MetricsReport]:
    """Metrics per dataset (or per dataset and scanner) for the records that have a score."""
    groups: "OrderedDict[Tuple[str, Optional[str]], List[ScoredSample]]" = OrderedDict()
    for record in records:
        if record.slide_id not in scores:
            continue
        scanner = (record.scanner or UNKNOWN_SCANNER) if by_scanner else None
        groups.setdefault((record.dataset, scanner), []).append(
            ScoredSample(
                slide_id=record.slide_id,
                score=scores[record.slide_id],
                label=record.label.target,  # type: ignore[union-attr]
            )
        )
    return [
        evaluate(samples, threshold, dataset=dataset, scanner=scanner)
        for (dataset, scanner), samples in groups.items()
    ]


def evaluate_manifest(
    model: FixationModel,
    manifest: Manifest,
    split: Optional[Split] = None,
    threads: Optional[int] = None,
    by_scanner: bool = False,
) -> List[MetricsReport]:
    records = manifest.by_split(split) if split is not None else list(manifest.records)
    if not records:
        raise EmptyInputError(f"no slides to evaluate{f' in split {split.value}' if split else ''}")
    unlabelled = [r.slide_id for r in records if r.label is None]
    if unlabelled:
        raise InvalidInputError(
            f"{len(unlabelled)} slides have no label",
            action="Evaluation needs the label column for every row",
            slides=unlabelled[:5],
        )
    results = infer_slides(model, records, threads)
    scores = {r.slide_id: r.probability_ffpe for r in results if isinstance(r, SlideVerdict)}
    skipped = len(records) - len(scores)
    if skipped:
        logger.warning("%d slides could not be scored and are left out of the metrics", skipped)
    if not scores:
        raise EmptyInputError("no slide could be scored")
    reports = group_reports(records, scores, by_scanner=by_scanner)
    for report in reports:
        logger.info(
            "%s%s: n=%d acc=%.4f f1=%.4f auroc=%s",
            report.dataset, f"/{report.scanner}" if report.scanner else "", report.n, report.accuracy, report.f1,
            "undefined" if report.auroc is None else f"{report.auroc:.4f}",
        )
    return reports


def write_evaluation(reports: Sequence[MetricsReport], csv_path: Union[str, Path]) -> Path:
    """Write the CSV table and a JSON report with the same stem; returns the JSON path."""
    csv_path = Path(csv_path)
    if csv_path.suffix.lower() == ".json":
        csv_path = csv_path.with_suffix(".csv")
    json_path = csv_path.with_suffix(".json")
    write_report_csv(reports, csv_path)
    write_report_json(reports, json_path)
    return json_path
