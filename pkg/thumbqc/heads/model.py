"""
Fixation Model

Composes backbone, optional tile aggregator and classification head for each
of the five approaches. ``forward`` always returns the slide-level FFPE
probability, so every approach shares one loss and one inference path:

    xs_slides          XS image   -> backbone -> head -> sigmoid
    vit_upscaling      M image    -> backbone (interpolated grid) -> head -> sigmoid
    tiled_soft_vote    n tiles    -> backbone -> head per tile -> mean sigmoid
    tiled_attention    n tiles    -> backbone -> AttentionPool -> head -> sigmoid
    tiled_transformer  n tiles    -> backbone -> TileTransformer -> head -> sigmoid
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
from pydantic import BaseModel, ConfigDict, Field, model_validator

from thumbqc.backbone.config import BackboneConfig
from thumbqc.backbone.vit import build_backbone
from thumbqc.backbone.weights import WeightStore
from thumbqc.core.errors import ConfigurationError, InvalidInputError
from thumbqc.heads.aggregators import AggregatorConfig, AttentionPool, TileTransformer, soft_vote
from thumbqc.heads.classifier import DEFAULT_DROPOUT, ClassificationHead, HeadConfig
from thumbqc.imaging.geometry import ScaleConfig, ScaleName, get_scale, preprocess_slide
from thumbqc.imaging.raster import RasterImage
from thumbqc.schemas.approach import Approach

logger = logging.getLogger(__name__)

Triple = Tuple[float, float, float]


class ModelSpec(BaseModel):
    """Everything needed to rebuild a FixationModel and preprocess its inputs."""

    model_config = ConfigDict(frozen=True)

    approach: Approach
    scale: ScaleName
    backbone: BackboneConfig
    head: HeadConfig
    aggregator: AggregatorConfig = AggregatorConfig()
    norm_mean: Triple = (0.5, 0.5, 0.5)
    norm_std: Triple = (0.5, 0.5, 0.5)
    backbone_name: str = Field(default="desk", description="Preset or free-form label for reports")

    @model_validator(mode="after")
    def check_consistency(self) -> "ModelSpec":
        if self.scale not in self.approach.allowed_scales:
            raise ValueError(
                f"approach {self.approach.value} cannot run at scale {self.scale.value}; "
                f"allowed: {[s.value for s in self.approach.allowed_scales]}"
            )
        if self.head.input_dim != self.backbone.feature_dim:
            raise ValueError(
                f"head input_dim {self.head.input_dim} does not match the backbone feature "
                f"dim {self.backbone.feature_dim} ({self.backbone.output_mode.value})"
            )
        if self.approach.tiled and get_scale(self.scale).n_tiles > self.aggregator.tile_slots:
            raise ValueError("tile grid exceeds the transformer position slots")
        if any(s <= 0 for s in self.norm_std):
            raise ValueError("norm_std must be positive")
        return self

    @classmethod
    def create(
        cls,
        approach: Approach,
        backbone: BackboneConfig,
        layer_sizes: Sequence[int],
        scale: Optional[ScaleName] = None,
        dropout_p: float = DEFAULT_DROPOUT,
        **kwargs,
    ) -> "ModelSpec":
        """Build a spec whose head input size follows the backbone's output mode."""
        approach = Approach(approach)
        try:
            return cls(
                approach=approach,
                scale=scale if scale is not None else approach.default_scale,
                backbone=backbone,
                head=HeadConfig(
                    layer_sizes=tuple(layer_sizes),
                    dropout_p=dropout_p,
                    input_dim=backbone.feature_dim,
                ),
                **kwargs,
            )
        except ValueError as e:
            raise ConfigurationError(str(e))

    @property
    def scale_config(self) -> ScaleConfig:
        return get_scale(self.scale)

    def preprocess(self, img: RasterImage) -> np.ndarray:
        return preprocess_slide(img, self.scale_config, self.approach.tiled, self.norm_mean, self.norm_std)


class FixationModel(nn.Module):
    """Slide-level FFPE probability model for one approach."""

    def __init__(self, spec: ModelSpec, seed: int = 0, backbone_weights: Optional[WeightStore] = None):
        super().__init__()
        self.spec = spec
        self.backbone = build_backbone(spec.backbone, seed)
        if backbone_weights is not None:
            backbone_weights.load_into(self.backbone)
        if spec.approach is Approach.vit_upscaling:
            scale = spec.scale_config
            p = spec.backbone.patch_size
            self.backbone.resize_grid(scale.target_height // p, scale.target_width // p)

        dim = spec.backbone.feature_dim
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed + 1)
            readout = {"head": ClassificationHead(spec.head)}
            agg = spec.aggregator
            if spec.approach is Approach.tiled_attention:
                readout["aggregator"] = AttentionPool(dim, agg.attention_heads)
            elif spec.approach is Approach.tiled_transformer:
                readout["aggregator"] = TileTransformer(
                    dim, agg.transformer_depth, agg.transformer_heads, agg.transformer_mlp_ratio, agg.tile_slots
                )
            self.readout = nn.ModuleDict(readout)

    @property
    def approach(self) -> Approach:
        return self.spec.approach

    def tile_features(self, x: torch.Tensor) -> torch.Tensor:
        """``(B, n, 3, 224, 224)`` tiles to ``(B, n, F)`` features."""
        if x.ndim != 5:
            raise InvalidInputError(f"tiled approaches expect (B, n, 3, H, W) input, got {tuple(x.shape)}")
        batch, n = x.shape[0], x.shape[1]
        return self.backbone(x.flatten(0, 1)).view(batch, n, -1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        head = self.readout["head"]
        approach = self.spec.approach
        if not approach.tiled:
            if x.ndim != 4:
                raise InvalidInputError(f"whole-slide approaches expect (B, 3, H, W) input, got {tuple(x.shape)}")
            return torch.sigmoid(head(self.backbone(x)))
        features = self.tile_features(x)
        if approach is Approach.tiled_soft_vote:
            batch, n = features.shape[0], features.shape[1]
            return soft_vote(head(features.flatten(0, 1)).view(batch, n))
        return torch.sigmoid(head(self.readout["aggregator"](features)))

    def predict_proba(self, inputs: np.ndarray) -> float:
        """Probability for one preprocessed slide, in inference mode."""
        self.eval()
        with torch.inference_mode():
            x = torch.from_numpy(np.ascontiguousarray(inputs, dtype=np.float32)).unsqueeze(0)
            return float(self(x)[0])

    def readout_weights(self, seed: Optional[int] = None) -> WeightStore:
        return WeightStore.from_module(self.readout, seed=seed)

    def backbone_weights(self, seed: Optional[int] = None) -> WeightStore:
        return WeightStore.from_module(self.backbone, seed=seed)
