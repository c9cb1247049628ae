from thumbqc.heads.aggregators import (  # noqa: F401
    MAX_TILE_SLOTS,
    AggregatorConfig,
    AttentionPool,
    TileTransformer,
    soft_vote,
)
from thumbqc.heads.classifier import HEAD_PRESETS, ClassificationHead, HeadConfig, HiddenLayer  # noqa: F401
from thumbqc.heads.model import FixationModel, ModelSpec  # noqa: F401
