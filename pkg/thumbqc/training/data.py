"""
Thumbnail Dataset

A torch Dataset over manifest records. Each item is loaded from disk and run
through the model's preprocessing, so workers only ever hold one slide.
Batch order comes from a seeded ``torch.Generator`` on the DataLoader and is
therefore the same for any ``num_workers``.
"""

import logging
from typing import List, Sequence, Tuple

import torch
from torch.utils.data import DataLoader, Dataset

from thumbqc.core.errors import InvalidInputError
from thumbqc.heads.model import ModelSpec
from thumbqc.imaging.raster import load_thumbnail
from thumbqc.schemas.manifest import ManifestRecord

logger = logging.getLogger(__name__)


class ThumbnailDataset(Dataset):
    """``(preprocessed slide, target)`` pairs; FFPE is target 1."""

    def __init__(self, records: Sequence[ManifestRecord], spec: ModelSpec):
        unlabelled = [r.slide_id for r in records if r.label is None]
        if unlabelled:
            raise InvalidInputError(f"{len(unlabelled)} training slides have no label", slides=unlabelled[:5])
        self.records: List[ManifestRecord] = list(records)
        self.spec = spec

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, index: int) -> Tuple[torch.Tensor, torch.Tensor]:
        record = self.records[index]
        inputs = self.spec.preprocess(load_thumbnail(record.path))
        target = torch.tensor(float(record.label.target), dtype=torch.float32)  # type: ignore[union-attr]
        return torch.from_numpy(inputs), target


def make_loader(
    dataset: ThumbnailDataset,
    batch_size: int,
    shuffle: bool,
    seed: int = 0,
    num_workers: int = 0,
) -> DataLoader:
    """Order-stable loader; training batches of one are dropped for BatchNorm."""
    generator = torch.Generator()
    generator.manual_seed(seed)
    drop_last = shuffle and len(dataset) % batch_size == 1 and len(dataset) > 1
    return DataLoader(
        dataset,
        batch_size=batch_size,
        shuffle=shuffle,
        drop_last=drop_last,
        num_workers=num_workers,
        generator=generator,
    )
