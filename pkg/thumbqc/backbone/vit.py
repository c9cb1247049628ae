"""
Vision Transformer Feature Extractor

A standard pre-norm ViT (LayerNorm -> multi-head self-attention -> residual,
LayerNorm -> GELU MLP -> residual) returning either the final class token or
the class token concatenated with the mean of the patch tokens.

Token layout: ``[class, register_1..register_R, patch_1..patch_N]``. Learned
positional embeddings are a ``rows x cols x D`` grid added to patch tokens
only; the class and register tokens carry no position and are never
interpolated. When the input's patch grid differs from the stored grid the
embeddings are interpolated (corner-aligned bilinear) on the fly;
``resize_grid`` makes such an interpolation permanent for fine-tuning at the
new resolution.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn
from einops import rearrange
from einops.layers.torch import Rearrange

from thumbqc.backbone.config import BackboneConfig, OutputMode
from thumbqc.core.errors import InvalidInputError

logger = logging.getLogger(__name__)

LAYER_NORM_EPS = 1e-6
INIT_STD = 0.02


@dataclass
class PositionalGrid:
    """Patch position embeddings plus the position-free extra tokens."""
    rows: int
    cols: int
    embeddings: torch.Tensor  # (rows, cols, D)
    extra_tokens: torch.Tensor  # (1 + R, D): class then registers

    def __post_init__(self) -> None:
        if tuple(self.embeddings.shape[:2]) != (self.rows, self.cols):
            raise InvalidInputError(
                f"embedding grid {tuple(self.embeddings.shape[:2])} does not match {self.rows}x{self.cols}"
            )
        if not torch.isfinite(self.embeddings).all():
            raise InvalidInputError("position embeddings must be finite")


def _corner_aligned_axis(n_in: int, n_out: int):
    """Source indices and weights mapping output 0 -> input 0 and output n_out-1 -> input n_in-1."""
    if n_out == 1:
        positions = torch.zeros(1, dtype=torch.float64)
    else:
        positions = torch.arange(n_out, dtype=torch.float64) * (n_in - 1) / (n_out - 1)
    lo = positions.floor().long().clamp(min=0, max=max(n_in - 2, 0))
    hi = (lo + 1).clamp(max=n_in - 1)
    frac = positions - lo.to(torch.float64)
    return lo, hi, frac


def interpolate_grid(grid: torch.Tensor, new_rows: int, new_cols: int) -> torch.Tensor:
    """Corner-aligned bilinear resize of a ``(rows, cols, D)`` tensor; differentiable."""
    if new_rows < 1 or new_cols < 1:
        raise InvalidInputError(f"invalid grid size {new_rows}x{new_cols}")
    rows, cols = grid.shape[0], grid.shape[1]
    if (rows, cols) == (new_rows, new_cols):
        return grid
    lo, hi, frac = _corner_aligned_axis(rows, new_rows)
    w = frac.to(grid.dtype)[:, None, None]
    grid = grid[lo] * (1 - w) + grid[hi] * w
    lo, hi, frac = _corner_aligned_axis(cols, new_cols)
    w = frac.to(grid.dtype)[None, :, None]
    return grid[:, lo] * (1 - w) + grid[:, hi] * w


def interpolate_pos_embed(grid: PositionalGrid, new_rows: int, new_cols: int) -> PositionalGrid:
    """Resize the patch grid; extra tokens pass through untouched."""
    return PositionalGrid(
        rows=new_rows,
        cols=new_cols,
        embeddings=interpolate_grid(grid.embeddings, new_rows, new_cols),
        extra_tokens=grid.extra_tokens,
    )


class Attention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        q, k, v = rearrange(self.qkv(x), "b n (three h d) -> three b h n d", three=3, h=self.heads)
        attn = torch.softmax(torch.matmul(q, k.transpose(-1, -2)) * self.scale, dim=-1)
        out = rearrange(torch.matmul(attn, v), "b h n d -> b n (h d)")
        return self.proj(out)


class Mlp(nn.Module):
    def __init__(self, dim: int, hidden_dim: int):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden_dim)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden_dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(x)))


class Block(nn.Module):
    """Pre-norm transformer encoder block."""

    def __init__(self, dim: int, heads: int, mlp_dim: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim, eps=LAYER_NORM_EPS)
        self.attn = Attention(dim, heads)
        self.norm2 = nn.LayerNorm(dim, eps=LAYER_NORM_EPS)
        self.mlp = Mlp(dim, mlp_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


def init_weights(module: nn.Module) -> None:
    if isinstance(module, nn.Linear):
        nn.init.trunc_normal_(module.weight, mean=0.0, std=INIT_STD)
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.LayerNorm):
        nn.init.ones_(module.weight)
        nn.init.zeros_(module.bias)


class VisionTransformer(nn.Module):
    """ViT backbone mapping ``(B, 3, H, W)`` images to ``(B, feature_dim)`` features."""

    def __init__(self, cfg: BackboneConfig):
        super().__init__()
        self.cfg = cfg
        dim = cfg.embed_dim
        patch_dim = 3 * cfg.patch_size ** 2

        self.to_patches = Rearrange(
            "b c (h p1) (w p2) -> b h w (p1 p2 c)", p1=cfg.patch_size, p2=cfg.patch_size
        )
        self.patch_proj = nn.Linear(patch_dim, dim)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, dim))
        self.register_tokens: Optional[nn.Parameter] = (
            nn.Parameter(torch.zeros(1, cfg.n_register_tokens, dim)) if cfg.n_register_tokens else None
        )
        self.pos_embed = nn.Parameter(torch.zeros(cfg.grid_size, cfg.grid_size, dim))
        self.blocks = nn.ModuleList(Block(dim, cfg.heads, cfg.mlp_dim) for _ in range(cfg.depth))
        self.norm = nn.LayerNorm(dim, eps=LAYER_NORM_EPS)

        self.apply(init_weights)
        nn.init.trunc_normal_(self.cls_token, std=INIT_STD)
        nn.init.trunc_normal_(self.pos_embed, std=INIT_STD)
        if self.register_tokens is not None:
            nn.init.trunc_normal_(self.register_tokens, std=INIT_STD)

    @property
    def n_extra_tokens(self) -> int:
        return 1 + self.cfg.n_register_tokens

    @property
    def grid_shape(self) -> tuple[int, int]:
        return int(self.pos_embed.shape[0]), int(self.pos_embed.shape[1])

    def positional_grid(self) -> PositionalGrid:
        extra = [self.cls_token[0]]
        if self.register_tokens is not None:
            extra.append(self.register_tokens[0])
        rows, cols = self.grid_shape
        return PositionalGrid(rows, cols, self.pos_embed.detach(), torch.cat(extra).detach())

    def resize_grid(self, rows: int, cols: int) -> None:
        """Replace the stored position grid with its interpolation to ``rows x cols``."""
        old = self.grid_shape
        grid = interpolate_pos_embed(self.positional_grid(), rows, cols)
        self.pos_embed = nn.Parameter(grid.embeddings.clone())
        logger.info("Resized position embedding grid from %s to %s", old, (rows, cols))

    def patch_embed(self, x: torch.Tensor) -> torch.Tensor:
        """Images ``(B, 3, H, W)`` to tokens ``(B, 1 + R + (H/P)(W/P), D)``."""
        if x.ndim != 4 or x.shape[1] != 3:
            raise InvalidInputError(f"expected (B, 3, H, W) input, got {tuple(x.shape)}")
        p = self.cfg.patch_size
        if x.shape[2] % p or x.shape[3] % p:
            raise InvalidInputError(
                f"input {x.shape[2]}x{x.shape[3]} is not divisible by patch size {p}"
            )
        patches = self.patch_proj(self.to_patches(x))
        rows, cols = patches.shape[1], patches.shape[2]
        pos = interpolate_grid(self.pos_embed, rows, cols)
        patches = rearrange(patches + pos, "b h w d -> b (h w) d")
        batch = x.shape[0]
        extra = [self.cls_token.expand(batch, -1, -1)]
        if self.register_tokens is not None:
            extra.append(self.register_tokens.expand(batch, -1, -1))
        return torch.cat(extra + [patches], dim=1)

    def encode(self, tokens: torch.Tensor) -> torch.Tensor:
        for block in self.blocks:
            tokens = block(tokens)
        return self.norm(tokens)

    def pool(self, tokens: torch.Tensor) -> torch.Tensor:
        cls = tokens[:, 0]
        if self.cfg.output_mode is OutputMode.class_token:
            return cls
        patch_mean = tokens[:, self.n_extra_tokens:].mean(dim=1)
        return torch.cat([cls, patch_mean], dim=-1)

    def forward_tokens(self, tokens: torch.Tensor) -> torch.Tensor:
        if tokens.ndim != 3 or tokens.shape[-1] != self.cfg.embed_dim:
            raise InvalidInputError(
                f"expected (B, N, {self.cfg.embed_dim}) tokens, got {tuple(tokens.shape)}"
            )
        return self.pool(self.encode(tokens))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.forward_tokens(self.patch_embed(x))


def build_backbone(cfg: BackboneConfig, seed: int = 0) -> VisionTransformer:
    """Seeded construction that leaves the global RNG state untouched."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return VisionTransformer(cfg)
