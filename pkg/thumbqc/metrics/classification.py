"""
Binary Classification Metrics

Accuracy, F1 and AUROC over scored slides. FFPE is the positive class
(label 1) and a score equal to the threshold predicts positive.

AUROC is the Mann-Whitney statistic computed from midranks, which credits
tied positive/negative pairs with one half. ``pairwise_auroc`` is the direct
O(n^2) definition over all pairs, kept for cross-checking.
"""

import csv
import json
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator
from scipy.stats import rankdata

from thumbqc.core.errors import InvalidInputError, UndefinedMetricError

DEFAULT_THRESHOLD = 0.5
REPORT_COLUMNS = ("dataset", "n", "acc", "f1", "auroc")
UNDEFINED = "undefined"


class ScoredSample(BaseModel):
    slide_id: str
    score: float = Field(ge=0.0, le=1.0)
    label: int

    @field_validator("score")
    @classmethod
    def check_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("score must be finite")
        return v

    @field_validator("label")
    @classmethod
    def check_binary(cls, v: int) -> int:
        if v not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {v}")
        return v


class Confusion(BaseModel):
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


class MetricsReport(BaseModel):
    """Metrics of one group of slides; ``auroc`` is None when only one class is present."""
    dataset: str = "all"
    scanner: Optional[str] = Field(default=None, description="Set when reports are split by scanner")
    n: int
    threshold: float
    accuracy: float
    f1: float
    auroc: Optional[float]
    confusion: Confusion

    @model_validator(mode="after")
    def check_counts(self) -> "MetricsReport":
        if self.confusion.n != self.n:
            raise ValueError(f"confusion counts sum to {self.confusion.n}, expected {self.n}")
        return self

    def csv_row(self) -> dict:
        row: dict = {"dataset": self.dataset}
        if self.scanner is not None:
            row["scanner"] = self.scanner
        row.update(
            n=self.n,
            acc=f"{self.accuracy:.4f}",
            f1=f"{self.f1:.4f}",
            auroc=UNDEFINED if self.auroc is None else f"{self.auroc:.4f}",
        )
        return row


def _require_samples(samples: Sequence[ScoredSample]) -> None:
    if not samples:
        raise InvalidInputError("metrics need at least one sample")


def _arrays(samples: Sequence[ScoredSample]):
    scores = np.array([s.score for s in samples], dtype=np.float64)
    labels = np.array([s.label for s in samples], dtype=np.int64)
    return scores, labels


def confusion(samples: Sequence[ScoredSample], threshold: float = DEFAULT_THRESHOLD) -> Confusion:
    _require_samples(samples)
    scores, labels = _arrays(samples)
    predicted = scores >= threshold
    positive = labels == 1
    return Confusion(
        tp=int(np.sum(predicted & positive)),
        fp=int(np.sum(predicted & ~positive)),
        tn=int(np.sum(~predicted & ~positive)),
        fn=int(np.sum(~predicted & positive)),
    )


def accuracy(samples: Sequence[ScoredSample], threshold: float = DEFAULT_THRESHOLD) -> float:
    c = confusion(samples, threshold)
    return (c.tp + c.tn) / c.n


def f1(samples: Sequence[ScoredSample], threshold: float = DEFAULT_THRESHOLD) -> float:
    """``2TP / (2TP + FP + FN)``, 0 when nothing is positive on either side."""
    c = confusion(samples, threshold)
    denominator = 2 * c.tp + c.fp + c.fn
    return 0.0 if denominator == 0 else 2 * c.tp / denominator


def _class_counts(labels: np.ndarray) -> tuple:
    n_pos = int(np.sum(labels == 1))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            "AUROC is undefined for a single-class sample set",
            positives=n_pos,
            negatives=n_neg,
        )
    return n_pos, n_neg


def auroc(samples: Sequence[ScoredSample]) -> float:
    _require_samples(samples)
    scores, labels = _arrays(samples)
    n_pos, n_neg = _class_counts(labels)
    ranks = rankdata(scores, method="average")
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pairwise_auroc(samples: Sequence[ScoredSample]) -> float:
    _require_samples(samples)
    scores, labels = _arrays(samples)
    n_pos, n_neg = _class_counts(labels)
    pos = scores[labels == 1][:, None]
    neg = scores[labels == 0][None, :]
    credit = np.sum(pos > neg) + 0.5 * np.sum(pos == neg)
    return float(credit) / (n_pos * n_neg)


def evaluate(
    samples: Sequence[ScoredSample],
    threshold: float = DEFAULT_THRESHOLD,
    dataset: str = "all",
    scanner: Optional[str] = None,
) -> MetricsReport:
    c = confusion(samples, threshold)
    try:
        area: Optional[float] = auroc(samples)
    except UndefinedMetricError:
        area = None
    denominator = 2 * c.tp + c.fp + c.fn
    return MetricsReport(
        dataset=dataset,
        scanner=scanner,
        n=c.n,
        threshold=threshold,
        accuracy=(c.tp + c.tn) / c.n,
        f1=0.0 if denominator == 0 else 2 * c.tp / denominator,
        auroc=area,
        confusion=c,
    )


def write_report_csv(reports: Iterable[MetricsReport], path: Union[str, Path]) -> None:
    """One row per report; the scanner column appears only when reports are split by scanner."""
    reports = list(reports)
    columns = list(REPORT_COLUMNS)
    if any(r.scanner is not None for r in reports):
        columns.insert(1, "scanner")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, restval="")
        writer.writeheader()
        for report in reports:
            writer.writerow(report.csv_row())


def write_report_json(reports: Iterable[MetricsReport], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload: List[dict] = [r.model_dump(mode="json") for r in reports]
    path.write_text(json.dumps(payload, indent=2) + "\n")
