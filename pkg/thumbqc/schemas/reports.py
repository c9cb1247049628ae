"""
Report Schemas

Records the harness writes: one verdict (or error record) per slide for
``infer``, and latency statistics for ``bench``. All of them serialise to one
JSON object per line.
"""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from thumbqc.imaging.geometry import ScaleName
from thumbqc.schemas.approach import Approach
from thumbqc.schemas.manifest import Label


class SlideVerdict(BaseModel):
    """Fixation prediction for one slide."""
    slide_id: str
    probability_ffpe: float = Field(gt=0.0, lt=1.0)
    predicted_label: Label
    approach: Approach
    scale: ScaleName
    inference_ms: float = Field(gt=0.0, description="Wall clock for load, preprocessing and forward pass")


class SlideError(BaseModel):
    """A slide that could not be classified; the batch carries on without it."""
    slide_id: str
    path: str
    error: str
    message: str


class LatencyStats(BaseModel):
    median_ms: float
    p95_ms: float
    samples_ms: List[float]

    @model_validator(mode="after")
    def check_order(self) -> "LatencyStats":
        if self.median_ms > self.p95_ms:
            raise ValueError("median latency exceeds p95")
        return self

    @classmethod
    def of(cls, samples_ms: List[float]) -> "LatencyStats":
        data = np.asarray(samples_ms, dtype=np.float64)
        return cls(
            median_ms=float(np.median(data)),
            p95_ms=float(np.percentile(data, 95)),
            samples_ms=[float(s) for s in samples_ms],
        )


class BenchEntry(BaseModel):
    """Single-threaded latency of one approach on one backbone configuration."""
    approach: Approach
    scale: ScaleName
    backbone: str
    n_tiles: int
    warmup: int = Field(ge=0)
    iterations: int = Field(ge=1)
    threads: int
    single_threaded: bool
    preprocess: LatencyStats
    forward: LatencyStats
    total: LatencyStats

    @field_validator("threads")
    @classmethod
    def check_threads(cls, v: int) -> int:
        if v < 1:
            raise ValueError("thread count must be >= 1")
        return v


class BenchReport(BaseModel):
    entries: List[BenchEntry]
    torch_version: Optional[str] = None
