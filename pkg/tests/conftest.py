import numpy as np
import pytest
import torch

from thumbqc.backbone.config import BackboneConfig, OutputMode, get_backbone_preset
from thumbqc.imaging.synthetic import write_synthetic_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def desk_config() -> BackboneConfig:
    return get_backbone_preset("desk")


@pytest.fixture
def tiny_config() -> BackboneConfig:
    """Small enough for finite differences: 32 px inputs, 2 x 2 token grid."""
    return BackboneConfig(patch_size=16, depth=1, heads=2, embed_dim=16, image_size=32)


@pytest.fixture
def tiny_registers_config() -> BackboneConfig:
    return BackboneConfig(
        patch_size=16, depth=1, heads=2, embed_dim=16, image_size=32,
        n_register_tokens=2, output_mode=OutputMode.class_plus_mean_patch,
    )


@pytest.fixture
def synthetic_slides(tmp_path):
    """Three labelled PNG thumbnails per class with splits unset."""
    return write_synthetic_dataset(tmp_path / "thumbs", n_per_class=3, seed=7, height=64, width=128)


@pytest.fixture(autouse=True)
def _deterministic_torch():
    torch.manual_seed(0)
    yield
