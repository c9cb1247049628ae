"""
Classification Head

Three hidden layers, each ``Dropout(ReLU(BatchNorm(W x + b)))``, followed by a
linear map to a single logit. BatchNorm uses eps 1e-5 and momentum 0.1;
dropout is inverted (scaled by 1/(1-p) at train time) so inference is a pure
pass-through with running statistics.
"""

from typing import Dict, Tuple

import torch
import torch.nn as nn
from pydantic import BaseModel, ConfigDict, Field, field_validator

from thumbqc.core.errors import InvalidInputError

BATCH_NORM_EPS = 1e-5
BATCH_NORM_MOMENTUM = 0.1
DEFAULT_DROPOUT = 0.1

# Hidden widths selected per backbone by the head-size study
HEAD_PRESETS: Dict[str, Tuple[int, int, int]] = {
    "desk": (64, 32, 16),
    "transpath": (2048, 1920, 128),
    "uni": (1600, 64, 192),
    "virchow2": (1728, 64, 192),
    "h_optimus_0": (1856, 192, 128),
}


class HeadConfig(BaseModel):
    """Widths of the three hidden layers, dropout and input feature size."""

    model_config = ConfigDict(frozen=True)

    layer_sizes: Tuple[int, int, int] = HEAD_PRESETS["desk"]
    dropout_p: float = Field(default=DEFAULT_DROPOUT, ge=0.0, lt=1.0)
    input_dim: int = Field(ge=1)

    @field_validator("layer_sizes")
    @classmethod
    def validate_widths(cls, v: Tuple[int, int, int]) -> Tuple[int, int, int]:
        if any(w < 1 for w in v):
            raise ValueError(f"hidden widths must be >= 1, got {list(v)}")
        return v


class HiddenLayer(nn.Module):
    """Linear -> BatchNorm -> ReLU -> Dropout."""

    def __init__(self, in_dim: int, out_dim: int, dropout_p: float):
        super().__init__()
        self.linear = nn.Linear(in_dim, out_dim)
        self.norm = nn.BatchNorm1d(out_dim, eps=BATCH_NORM_EPS, momentum=BATCH_NORM_MOMENTUM)
        self.act = nn.ReLU()
        self.dropout = nn.Dropout(dropout_p)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.linear.in_features:
            raise InvalidInputError(
                f"hidden layer expects {self.linear.in_features} features, got {x.shape[-1]}"
            )
        return self.dropout(self.act(self.norm(self.linear(x))))


class ClassificationHead(nn.Module):
    """Maps ``(N, input_dim)`` features to ``(N,)`` logits."""

    def __init__(self, cfg: HeadConfig):
        super().__init__()
        self.cfg = cfg
        widths = (cfg.input_dim,) + tuple(cfg.layer_sizes)
        self.hidden = nn.Sequential(
            *(HiddenLayer(widths[i], widths[i + 1], cfg.dropout_p) for i in range(3))
        )
        self.out = nn.Linear(widths[-1], 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 2 or x.shape[1] != self.cfg.input_dim:
            raise InvalidInputError(
                f"head expects (N, {self.cfg.input_dim}) features, got {tuple(x.shape)}"
            )
        return self.out(self.hidden(x)).squeeze(-1)
