"""
Supervised Training Loop

``train`` fits a FixationModel on the train split of a manifest and keeps the
weights of the epoch with the best validation accuracy (earliest epoch wins
ties). The run is deterministic for a given config: parameter init comes from
the config seed, batch order from a seeded loader generator, and dropout from
the global torch RNG, which is seeded inside a forked RNG scope so the caller's
state is left untouched.

Only trainable parameters reach AdamW, so frozen tensors (ViT Upscaling keeps
everything but attention and position embeddings fixed) are never touched by
weight decay either.
"""

import copy
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import torch
from torch.utils.data import DataLoader

from thumbqc.backbone.freezing import apply_mask, freeze_mask
from thumbqc.backbone.weights import WeightStore
from thumbqc.core.errors import PreconditionError
from thumbqc.heads.model import FixationModel
from thumbqc.metrics import ScoredSample, accuracy
from thumbqc.schemas.manifest import Manifest, ManifestRecord, Split
from thumbqc.training.config import TrainConfig
from thumbqc.training.data import ThumbnailDataset, make_loader
from thumbqc.training.loss import bce_loss

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpochRecord:
    """Losses and accuracies of one epoch; no timings, so logs compare exactly."""
    epoch: int
    steps: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainResult:
    model: FixationModel
    epochs: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: float = 0.0


def _split_records(manifest: Manifest, split: Split) -> List[ManifestRecord]:
    records = manifest.by_split(split)
    if not records:
        raise PreconditionError(
            f"manifest has no {split.value} slides",
            action="Assign splits with split_dataset or the manifest's split column",
        )
    return records


def evaluate_loader(model: FixationModel, loader: DataLoader) -> Dict[str, float]:
    """Mean loss and accuracy of ``model`` in inference mode."""
    model.eval()
    losses: List[float] = []
    samples: List[ScoredSample] = []
    with torch.inference_mode():
        for inputs, targets in loader:
            probs = model(inputs)
            losses.append(float(bce_loss(probs, targets)) * len(targets))
            samples.extend(
                ScoredSample(slide_id=str(len(samples) + i), score=float(p), label=int(t))
                for i, (p, t) in enumerate(zip(probs.tolist(), targets.tolist()))
            )
    return {"loss": float(np.sum(losses) / len(samples)), "accuracy": accuracy(samples)}


def train(
    manifest: Manifest,
    config: TrainConfig,
    backbone_weights: Optional[WeightStore] = None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainResult:
    """
    Train the configured approach on ``manifest``'s train split.

    Raises PreconditionError for empty train/val splits and ConfigurationError
    for an approach/scale mismatch. ``on_epoch`` is called after every epoch.
    """
    train_records = _split_records(manifest, Split.train)
    val_records = _split_records(manifest, Split.val)
    spec = config.to_model_spec()
    if len(train_records) < 2:
        raise PreconditionError("training needs at least two slides for batch statistics")

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        model = FixationModel(spec, seed=config.seed, backbone_weights=backbone_weights)
        mask = freeze_mask(spec.backbone, config.resolved_freeze_mode)
        apply_mask(model.backbone, mask)
        params = [p for p in model.parameters() if p.requires_grad]
        logger.info(
            "Training %s at scale %s: %d trainable tensors, %d frozen backbone tensors",
            spec.approach.value, spec.scale.value, len(params), len(mask.frozen),
        )
        optimizer = torch.optim.AdamW(params, lr=config.learning_rate, weight_decay=config.weight_decay)

        train_loader = make_loader(
            ThumbnailDataset(train_records, spec), config.batch_size, shuffle=True,
            seed=config.seed, num_workers=config.num_workers,
        )
        val_loader = make_loader(
            ThumbnailDataset(val_records, spec), config.batch_size, shuffle=False,
            num_workers=config.num_workers,
        )

        result = TrainResult(model=model)
        best_state = copy.deepcopy(model.state_dict())
        best_accuracy = -1.0
        steps = 0
        for epoch in range(1, config.epochs + 1):
            model.train()
            running: List[float] = []
            seen = 0
            correct = 0
            for inputs, targets in train_loader:
                if config.max_steps is not None and steps >= config.max_steps:
                    break
                optimizer.zero_grad()
                probs = model(inputs)
                loss = bce_loss(probs, targets)
                loss.backward()
                optimizer.step()
                steps += 1
                running.append(float(loss.detach()) * len(targets))
                seen += len(targets)
                correct += int(((probs.detach() >= 0.5).float() == targets).sum())

            if seen == 0:
                logger.info("Step limit %s reached before epoch %d", config.max_steps, epoch)
                break
            val = evaluate_loader(model, val_loader)
            record = EpochRecord(
                epoch=epoch,
                steps=steps,
                train_loss=float(np.sum(running) / seen),
                train_accuracy=correct / seen,
                val_loss=val["loss"],
                val_accuracy=val["accuracy"],
            )
            result.epochs.append(record)
            logger.info(
                "Epoch %d/%d: train_loss=%.4f val_loss=%.4f val_acc=%.4f",
                epoch, config.epochs, record.train_loss, record.val_loss, record.val_accuracy,
            )
            if record.val_accuracy > best_accuracy:
                best_accuracy = record.val_accuracy
                best_state = copy.deepcopy(model.state_dict())
                result.best_epoch = epoch
            if on_epoch is not None:
                on_epoch(record)

        model.load_state_dict(best_state)
        model.eval()
        result.best_val_accuracy = max(best_accuracy, 0.0)
    return result


def write_epoch_log(records: Sequence[EpochRecord], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for record in records:
            fh.write(json.dumps(asdict(record)) + "\n")
