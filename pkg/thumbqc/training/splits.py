"""
Manifests and Splits

Reading and writing slide manifests (CSV with header
``slide_id,path,label,dataset,split[,scanner]`` or JSONL with the same keys)
and the stratified train/val/test split.

Stratification allocates each class separately: ``floor(f * n)`` slides per
split, with the remaining slides handed out by largest fractional remainder
(earlier splits win ties). Classes are shuffled in the order FFPE, FS with one
shared seeded generator, so the assignment is fully determined by the seed.
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from thumbqc.core.errors import InvalidInputError, PreconditionError
from thumbqc.schemas.manifest import Label, Manifest, ManifestRecord, Split

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ("slide_id", "path", "label", "dataset", "split", "scanner")
SPLIT_ORDER = (Split.train, Split.val, Split.test)
_FLOOR_SLACK = 1e-9


def allocate_counts(n: int, fractions: Sequence[float]) -> List[int]:
    """Largest-remainder allocation of ``n`` items to ``fractions``."""
    raw = [f * n for f in fractions]
    counts = [int(math.floor(r + _FLOOR_SLACK)) for r in raw]
    remainders = [r - c for r, c in zip(raw, counts)]
    order = sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def split_dataset(
    records: Sequence[ManifestRecord],
    fractions: Tuple[float, float, float] = (5 / 9, 2 / 9, 2 / 9),
    seed: int = 0,
) -> Manifest:
    """
    Assign every record to train, val or test, stratified by label.

    Returns a new manifest in the original record order with ``split`` set.
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise InvalidInputError(f"expected three non-negative fractions, got {list(fractions)}")
    if abs(sum(fractions) - 1.0) > 1e-6:
        raise PreconditionError(f"split fractions must sum to 1, got {sum(fractions)}")

    by_label: Dict[Label, List[int]] = {label: [] for label in Label}
    for i, record in enumerate(records):
        if record.label is None:
            raise InvalidInputError(f"slide {record.slide_id!r} has no label and cannot be stratified")
        by_label[record.label].append(i)
    missing = [label.value for label, idx in by_label.items() if not idx]
    if missing:
        raise PreconditionError(f"class {', '.join(missing)} is absent; stratified split needs both classes")

    rng = np.random.default_rng(seed)
    assignment: Dict[int, Split] = {}
    for label in (Label.FFPE, Label.FS):
        indices = by_label[label]
        shuffled = [indices[j] for j in rng.permutation(len(indices))]
        start = 0
        for split, count in zip(SPLIT_ORDER, allocate_counts(len(indices), fractions)):
            for i in shuffled[start:start + count]:
                assignment[i] = split
            start += count

    result = Manifest.of(r.model_copy(update={"split": assignment[i]}) for i, r in enumerate(records))
    for split in SPLIT_ORDER:
        logger.info("Split %s: %d slides", split.value, len(result.by_split(split)))
    return result


def _clean(row: Dict[str, str]) -> Dict[str, str]:
    return {k: v for k, v in row.items() if k is not None and v not in (None, "")}


def read_manifest(path: Union[str, Path]) -> Manifest:
    """Load a CSV or JSONL manifest; relative thumbnail paths resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"manifest {path} does not exist", action="Pass an existing --manifest path")
    if path.suffix.lower() == ".jsonl":
        rows = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    elif path.suffix.lower() == ".csv":
        with path.open(newline="") as fh:
            rows = [_clean(row) for row in csv.DictReader(fh)]
    else:
        raise InvalidInputError(f"manifest {path} must be .csv or .jsonl")

    try:
        records = [ManifestRecord.model_validate(row) for row in rows]
        for i, record in enumerate(records):
            if not Path(record.path).is_absolute():
                records[i] = record.model_copy(update={"path": str(path.parent / record.path)})
        return Manifest.of(records)
    except ValidationError as e:
        raise InvalidInputError(f"manifest {path} is invalid: {e.errors()[0]['msg']}", errors=len(e.errors()))


def write_manifest(manifest: Manifest, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".jsonl":
        with path.open("w") as fh:
            for record in manifest.records:
                fh.write(record.model_dump_json(exclude_none=True) + "\n")
        return
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_COLUMNS)
        writer.writeheader()
        for record in manifest.records:
            row = record.model_dump(mode="json")
            writer.writerow({k: ("" if row.get(k) is None else row[k]) for k in MANIFEST_COLUMNS})
