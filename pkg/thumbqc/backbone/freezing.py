"""
Selective Freezing

ViT Upscaling keeps the pretrained weights and fine-tunes only the attention
projections and the (interpolated) position embeddings. A ParamMask records
that choice per backbone parameter; ``apply_mask`` turns it into
``requires_grad`` flags so the optimizer never sees frozen tensors.
"""

import enum
from dataclasses import dataclass
from typing import Dict, List

import torch.nn as nn

from thumbqc.backbone.config import BackboneConfig
from thumbqc.core.errors import InvalidInputError


class FreezeMode(str, enum.Enum):
    full = "full"
    attention_and_pos = "attention_and_pos"


@dataclass(frozen=True)
class ParamMask:
    """Trainable flag for every backbone parameter."""
    flags: Dict[str, bool]

    @property
    def trainable(self) -> List[str]:
        return [name for name, on in self.flags.items() if on]

    @property
    def frozen(self) -> List[str]:
        return [name for name, on in self.flags.items() if not on]


def is_attention_or_position(name: str) -> bool:
    return name == "pos_embed" or ".attn." in name


def freeze_mask(cfg: BackboneConfig, mode: FreezeMode) -> ParamMask:
    """Build the mask for ``cfg``'s parameter schema."""
    from thumbqc.backbone.weights import parameter_names

    mode = FreezeMode(mode)
    names = parameter_names(cfg)
    if mode is FreezeMode.full:
        return ParamMask({name: True for name in names})
    return ParamMask({name: is_attention_or_position(name) for name in names})


def apply_mask(module: nn.Module, mask: ParamMask) -> None:
    """Set ``requires_grad`` on each parameter; the mask must cover them exactly."""
    params = dict(module.named_parameters())
    if set(params) != set(mask.flags):
        missing = sorted(set(params) - set(mask.flags))
        extra = sorted(set(mask.flags) - set(params))
        raise InvalidInputError(
            "parameter mask does not match the module", missing=missing, unexpected=extra
        )
    for name, param in params.items():
        param.requires_grad_(mask.flags[name])
