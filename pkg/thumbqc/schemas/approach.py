"""
Classification Approaches

Two families: whole-slide approaches feed one image to the backbone, tiled
approaches feed the 224 x 224 tiles of the scale's grid and aggregate.
"""

import enum
from typing import Tuple

from thumbqc.backbone.freezing import FreezeMode
from thumbqc.imaging.geometry import ScaleName


class Approach(str, enum.Enum):
    xs_slides = "xs_slides"
    vit_upscaling = "vit_upscaling"
    tiled_soft_vote = "tiled_soft_vote"
    tiled_attention = "tiled_attention"
    tiled_transformer = "tiled_transformer"

    @property
    def tiled(self) -> bool:
        return self.value.startswith("tiled_")

    @property
    def allowed_scales(self) -> Tuple[ScaleName, ...]:
        if self is Approach.xs_slides:
            return (ScaleName.XS,)
        if self is Approach.vit_upscaling:
            return (ScaleName.M,)
        return (ScaleName.M, ScaleName.L)

    @property
    def default_scale(self) -> ScaleName:
        return self.allowed_scales[-1]

    @property
    def default_freeze_mode(self) -> FreezeMode:
        if self is Approach.vit_upscaling:
            return FreezeMode.attention_and_pos
        return FreezeMode.full
