"""
Tile Aggregation

Three ways of turning the per-tile outputs of one slide into a slide-level
prediction:

- ``soft_vote``: mean of the tile sigmoid probabilities; differentiable, so
  the whole pipeline trains end to end through it.
- ``AttentionPool``: one learned query per head attends over projected tile
  keys; the pooled vector is the softmax-weighted sum of projected values,
  heads concatenated and projected back to the feature size. With one head
  and identity projections this is exactly F_att = sum_i alpha_i f_i.
- ``TileTransformer``: tile features plus learned per-slot position
  embeddings, prefixed with a class token, through a transformer encoder;
  the final class token is the slide feature.
"""

import torch
import torch.nn as nn
from pydantic import BaseModel, ConfigDict, Field

from thumbqc.backbone.vit import Block, init_weights
from thumbqc.core.errors import InvalidInputError

MAX_TILE_SLOTS = 32


class AggregatorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    attention_heads: int = Field(default=4, ge=1)
    transformer_depth: int = Field(default=1, ge=0)
    transformer_heads: int = Field(default=4, ge=1)
    transformer_mlp_ratio: float = Field(default=4.0, gt=0)
    tile_slots: int = Field(default=MAX_TILE_SLOTS, ge=1)


def soft_vote(tile_logits: torch.Tensor) -> torch.Tensor:
    """Mean sigmoid over the last dimension."""
    if tile_logits.shape[-1] == 0:
        raise InvalidInputError("soft voting needs at least one tile")
    return torch.sigmoid(tile_logits).mean(dim=-1)


def _as_bags(features: torch.Tensor) -> torch.Tensor:
    if features.ndim == 2:
        features = features.unsqueeze(0)
    if features.ndim != 3:
        raise InvalidInputError(f"expected (B, n, D) tile features, got {tuple(features.shape)}")
    if features.shape[1] == 0:
        raise InvalidInputError("aggregation needs at least one tile")
    return features


class AttentionPool(nn.Module):
    """Learned-query multi-head attention pooling over the tiles of a slide."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads:
            raise InvalidInputError(f"feature dim {dim} is not divisible by {heads} heads")
        self.dim = dim
        self.query = nn.Parameter(torch.zeros(1, 1, dim))
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        nn.init.trunc_normal_(self.query, std=0.02)

    def _attend(self, features: torch.Tensor):
        bags = _as_bags(features)
        if bags.shape[-1] != self.dim:
            raise InvalidInputError(f"attention pool expects dim {self.dim}, got {bags.shape[-1]}")
        query = self.query.expand(bags.shape[0], -1, -1)
        return self.attn(query, bags, bags, need_weights=True, average_attn_weights=False)

    def attention_weights(self, features: torch.Tensor) -> torch.Tensor:
        """Per-head weights alpha, shape ``(B, heads, n)``; each row sums to 1."""
        _, weights = self._attend(features)
        return weights[:, :, 0, :]

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        pooled, _ = self._attend(features)
        return pooled[:, 0]


class TileTransformer(nn.Module):
    """Transformer over tile tokens with learned slot positions; returns the class token."""

    def __init__(self, dim: int, depth: int, heads: int, mlp_ratio: float = 4.0, slots: int = MAX_TILE_SLOTS):
        super().__init__()
        if dim % heads:
            raise InvalidInputError(f"feature dim {dim} is not divisible by {heads} heads")
        self.slots = slots
        self.cls_token = nn.Parameter(torch.zeros(1, 1, dim))
        self.pos_embed = nn.Parameter(torch.zeros(slots, dim))
        self.blocks = nn.ModuleList(Block(dim, heads, int(round(dim * mlp_ratio))) for _ in range(depth))
        self.apply(init_weights)
        nn.init.trunc_normal_(self.cls_token, std=0.02)
        nn.init.trunc_normal_(self.pos_embed, std=0.02)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        bags = _as_bags(features)
        n = bags.shape[1]
        if n > self.slots:
            raise InvalidInputError(f"{n} tiles exceed the {self.slots} position slots")
        tokens = torch.cat([self.cls_token.expand(bags.shape[0], -1, -1), bags + self.pos_embed[:n]], dim=1)
        for block in self.blocks:
            tokens = block(tokens)
        return tokens[:, 0]
