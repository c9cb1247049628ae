"""
Backbone Configurations

Architecture descriptions of the vision transformers used as feature
extractors. The named presets mirror the published pathology backbones
(TransPath ViT-S/16, UNI ViT-L/16, Virchow2 ViT-H/14, H-Optimus-0 ViT-g/14)
so real checkpoints can be wired in by name; the ``desk`` preset is the small
configuration used by tests and benchmarks.
"""

import enum
from typing import Dict

from pydantic import BaseModel, ConfigDict, Field, model_validator

BASE_IMAGE_SIZE = 224
DEFAULT_REGISTER_TOKENS = 4


class OutputMode(str, enum.Enum):
    """Which final tokens form the feature vector."""
    class_token = "class_token"
    class_plus_mean_patch = "class_plus_mean_patch"


class BackboneConfig(BaseModel):
    """Pre-norm ViT architecture."""

    model_config = ConfigDict(frozen=True)

    patch_size: int = Field(default=16, description="Square patch side in pixels")
    depth: int = Field(default=2, ge=0)
    heads: int = Field(default=4, ge=1)
    embed_dim: int = Field(default=64, ge=1, description="Token width D")
    mlp_ratio: float = Field(default=4.0, gt=0)
    n_register_tokens: int = Field(default=0, ge=0)
    output_mode: OutputMode = OutputMode.class_token
    image_size: int = Field(default=BASE_IMAGE_SIZE, description="Side of the pretraining input")

    @model_validator(mode="after")
    def check_geometry(self) -> "BackboneConfig":
        if self.patch_size < 1 or self.image_size % self.patch_size != 0:
            raise ValueError(
                f"image_size {self.image_size} is not divisible by patch_size {self.patch_size}"
            )
        if self.embed_dim % self.heads != 0:
            raise ValueError(f"embed_dim {self.embed_dim} is not divisible by heads {self.heads}")
        return self

    @property
    def grid_size(self) -> int:
        """Token grid side at the pretraining resolution."""
        return self.image_size // self.patch_size

    @property
    def feature_dim(self) -> int:
        return self.embed_dim if self.output_mode is OutputMode.class_token else 2 * self.embed_dim

    @property
    def mlp_dim(self) -> int:
        return int(round(self.embed_dim * self.mlp_ratio))


BACKBONE_PRESETS: Dict[str, BackboneConfig] = {
    "desk": BackboneConfig(patch_size=16, depth=2, heads=4, embed_dim=64),
    "transpath": BackboneConfig(patch_size=16, depth=12, heads=6, embed_dim=384),
    "uni": BackboneConfig(
        patch_size=16, depth=24, heads=16, embed_dim=1024,
        output_mode=OutputMode.class_plus_mean_patch,
    ),
    "virchow2": BackboneConfig(
        patch_size=14, depth=32, heads=16, embed_dim=1280,
        output_mode=OutputMode.class_plus_mean_patch,
    ),
    "h_optimus_0": BackboneConfig(
        patch_size=14, depth=40, heads=24, embed_dim=1536,
        n_register_tokens=DEFAULT_REGISTER_TOKENS,
        output_mode=OutputMode.class_plus_mean_patch,
    ),
}


def get_backbone_preset(name: str) -> BackboneConfig:
    try:
        return BACKBONE_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown backbone preset {name!r}; choose from {sorted(BACKBONE_PRESETS)}")
