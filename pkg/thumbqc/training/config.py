"""
Training Run Configuration

A TrainConfig is read from the JSON file given to ``thumbqc train`` and fully
determines a run together with the manifest: approach, scale, backbone and
head architecture, optimizer settings, epochs and seed.

Defaults follow the ledger decisions for a run with no published schedule:
AdamW with lr 1e-4 and weight decay 1e-2, 30 epochs, model selection on the
best validation accuracy.
"""

import json
import logging
from pathlib import Path
from typing import Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from thumbqc.backbone.config import BACKBONE_PRESETS, BackboneConfig
from thumbqc.backbone.freezing import FreezeMode
from thumbqc.core.errors import ConfigurationError
from thumbqc.heads.aggregators import AggregatorConfig
from thumbqc.heads.classifier import DEFAULT_DROPOUT, HEAD_PRESETS
from thumbqc.heads.model import ModelSpec
from thumbqc.imaging.geometry import ScaleName
from thumbqc.schemas.approach import Approach

logger = logging.getLogger(__name__)

DEFAULT_LEARNING_RATE = 1e-4
DEFAULT_WEIGHT_DECAY = 1e-2
DEFAULT_EPOCHS = 30


class TrainConfig(BaseModel):
    """Validated settings of one training run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    approach: Approach = Approach.tiled_soft_vote
    scale: Optional[ScaleName] = Field(default=None, description="Defaults to the approach's largest scale")
    backbone_name: str = Field(default="desk", description="Backbone preset; also selects the head preset")
    backbone: Optional[BackboneConfig] = Field(default=None, description="Overrides the preset architecture")
    layer_sizes: Optional[Tuple[int, int, int]] = Field(default=None, description="Head widths; preset if unset")
    dropout_p: float = Field(default=DEFAULT_DROPOUT, ge=0.0, lt=1.0)
    aggregator: AggregatorConfig = AggregatorConfig()
    epochs: int = Field(default=DEFAULT_EPOCHS, ge=1)
    batch_size: int = Field(default=8, ge=2, description="BatchNorm in the head needs two samples per step")
    learning_rate: float = Field(default=DEFAULT_LEARNING_RATE, gt=0)
    weight_decay: float = Field(default=DEFAULT_WEIGHT_DECAY, ge=0)
    seed: int = Field(default=0, ge=0)
    freeze_mode: Optional[FreezeMode] = Field(default=None, description="Defaults per approach")
    max_steps: Optional[int] = Field(default=None, ge=1, description="Stop after this many optimizer steps")
    num_workers: int = Field(default=0, ge=0, description="DataLoader worker processes")
    norm_mean: Tuple[float, float, float] = (0.5, 0.5, 0.5)
    norm_std: Tuple[float, float, float] = (0.5, 0.5, 0.5)

    @model_validator(mode="after")
    def check_approach(self) -> "TrainConfig":
        if self.scale is not None and self.scale not in self.approach.allowed_scales:
            raise ValueError(
                f"approach {self.approach.value} is incompatible with scale {self.scale.value}; "
                f"allowed: {[s.value for s in self.approach.allowed_scales]}"
            )
        if self.backbone is None and self.backbone_name not in BACKBONE_PRESETS:
            raise ValueError(f"unknown backbone preset {self.backbone_name!r}; choose from {sorted(BACKBONE_PRESETS)}")
        if self.layer_sizes is None and self.backbone_name not in HEAD_PRESETS:
            raise ValueError(f"no head preset for {self.backbone_name!r}; set layer_sizes")
        return self

    @property
    def resolved_scale(self) -> ScaleName:
        return self.scale if self.scale is not None else self.approach.default_scale

    @property
    def resolved_backbone(self) -> BackboneConfig:
        return self.backbone if self.backbone is not None else BACKBONE_PRESETS[self.backbone_name]

    @property
    def resolved_layer_sizes(self) -> Tuple[int, int, int]:
        return self.layer_sizes if self.layer_sizes is not None else HEAD_PRESETS[self.backbone_name]

    @property
    def resolved_freeze_mode(self) -> FreezeMode:
        return self.freeze_mode if self.freeze_mode is not None else self.approach.default_freeze_mode

    def to_model_spec(self) -> ModelSpec:
        return ModelSpec.create(
            self.approach,
            self.resolved_backbone,
            self.resolved_layer_sizes,
            scale=self.resolved_scale,
            dropout_p=self.dropout_p,
            aggregator=self.aggregator,
            norm_mean=self.norm_mean,
            norm_std=self.norm_std,
            backbone_name=self.backbone_name,
        )


def load_config(model: type, path: Union[str, Path]):
    """Parse a JSON run config into ``model``; every failure is a ConfigurationError."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file {path} does not exist", action="Pass an existing --config path")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"config file {path} is not valid JSON: {e}")
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        fields = {".".join(str(p) for p in err["loc"]) or "<root>": err["msg"] for err in e.errors()}
        raise ConfigurationError(
            f"config file {path} is invalid",
            action="Fix the listed fields",
            fields=fields,
        )
