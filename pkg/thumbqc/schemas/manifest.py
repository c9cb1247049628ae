"""
Slide Manifest Schemas

A manifest lists the slides of one or more datasets together with their
fixation label and split assignment. It is the input of training, evaluation
and manifest-driven inference.

Labels are stored as text (``FFPE`` / ``FS``) and encoded numerically with
FFPE as the positive class (1), which is the convention used by the loss,
the F1 score and the verdicts.
"""

from __future__ import annotations

import enum
from typing import Iterable, List, Optional

from pydantic import BaseModel, Field, model_validator


class Label(str, enum.Enum):
    """Tissue fixation type."""
    FFPE = "FFPE"
    FS = "FS"

    @property
    def target(self) -> int:
        """Numeric target: FFPE is the positive class."""
        return 1 if self is Label.FFPE else 0

    @classmethod
    def from_target(cls, value: int) -> "Label":
        return cls.FFPE if value == 1 else cls.FS


class Split(str, enum.Enum):
    """Dataset partition a slide belongs to."""
    train = "train"
    val = "val"
    test = "test"


class ManifestRecord(BaseModel):
    """One slide thumbnail with its label, dataset and split."""
    slide_id: str = Field(min_length=1)
    path: str = Field(min_length=1, description="Thumbnail file (PNG or PPM)")
    label: Optional[Label] = Field(default=None, description="Missing for unlabelled inference inputs")
    dataset: str = Field(default="default")
    split: Optional[Split] = None
    scanner: Optional[str] = Field(default=None, description="Scanner model; eval --by-scanner groups on it")


class Manifest(BaseModel):
    """Ordered collection of manifest records with unique slide ids."""
    records: List[ManifestRecord]

    @model_validator(mode="after")
    def check_unique_ids(self) -> "Manifest":
        seen = set()
        for record in self.records:
            if record.slide_id in seen:
                raise ValueError(f"duplicate slide_id {record.slide_id!r}")
            seen.add(record.slide_id)
        return self

    def by_split(self, split: Split) -> List[ManifestRecord]:
        return [r for r in self.records if r.split == split]

    def datasets(self) -> List[str]:
        """Dataset names in order of first appearance."""
        names: List[str] = []
        for record in self.records:
            if record.dataset not in names:
                names.append(record.dataset)
        return names

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def of(cls, records: Iterable[ManifestRecord]) -> "Manifest":
        return cls(records=list(records))
