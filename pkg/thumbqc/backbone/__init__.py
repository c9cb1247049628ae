from thumbqc.backbone.config import (  # noqa: F401
    BACKBONE_PRESETS,
    BackboneConfig,
    OutputMode,
    get_backbone_preset,
)
from thumbqc.backbone.freezing import FreezeMode, ParamMask, apply_mask, freeze_mask  # noqa: F401
from thumbqc.backbone.vit import (  # noqa: F401
    PositionalGrid,
    VisionTransformer,
    build_backbone,
    interpolate_grid,
    interpolate_pos_embed,
)
from thumbqc.backbone.weights import (  # noqa: F401
    WeightStore,
    backbone_schema,
    load_weights,
    load_weights_file,
    parameter_names,
    save_weights,
    save_weights_file,
)
