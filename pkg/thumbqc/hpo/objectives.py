"""
Study Objectives

``head_size_objective`` is the real search: train a model whose head uses the
suggested hidden widths for ``budget`` epochs and report its best validation
accuracy. ``quadratic_objective`` is a cheap deterministic stand-in with a
known optimum for dry runs of the study machinery.
"""

import logging
from typing import Dict, Optional

import numpy as np

from thumbqc.backbone.weights import WeightStore
from thumbqc.core.errors import ConfigurationError
from thumbqc.hpo.study import Objective
from thumbqc.hpo.tpe import Point, SearchSpace
from thumbqc.schemas.manifest import Manifest
from thumbqc.training.config import TrainConfig
from thumbqc.training.trainer import train

logger = logging.getLogger(__name__)


def budget_to_epochs(budget: float) -> int:
    return max(1, int(round(budget)))


def head_size_objective(
    manifest: Manifest,
    train_config: TrainConfig,
    backbone_weights: Optional[WeightStore] = None,
) -> Objective:
    """Objective over three head widths given in dimension order."""

    def objective(point: Point, budget: float) -> float:
        widths = tuple(int(v) for v in point.values())
        if len(widths) != 3:
            raise ConfigurationError(f"head size search needs three widths, got {len(widths)}")
        config = train_config.model_copy(update={"layer_sizes": widths, "epochs": budget_to_epochs(budget)})
        result = train(manifest, config, backbone_weights)
        logger.debug("Head %s for %d epochs: val_acc=%.4f", widths, config.epochs, result.best_val_accuracy)
        return result.best_val_accuracy

    return objective


def quadratic_objective(space: SearchSpace, center: Optional[Dict[str, int]] = None) -> Objective:
    """``-sum(((x - c) / span)^2)``, maximal at ``center`` (default: middle of each range)."""
    if center is None:
        center = {d.name: d.low + d.step * ((d.n_values - 1) // 2) for d in space.dimensions}
    missing = set(space.names) - set(center)
    if missing:
        raise ConfigurationError(f"quadratic center is missing {sorted(missing)}")
    spans = {d.name: float(max(d.high - d.low, 1)) for d in space.dimensions}

    def objective(point: Point, budget: float) -> float:
        return -float(np.sum([((point[name] - center[name]) / spans[name]) ** 2 for name in space.names]))

    return objective
