import numpy as np
import pytest
import torch

from thumbqc.backbone import (
    BACKBONE_PRESETS,
    BackboneConfig,
    FreezeMode,
    OutputMode,
    PositionalGrid,
    apply_mask,
    build_backbone,
    freeze_mask,
    interpolate_grid,
    interpolate_pos_embed,
    parameter_names,
)
from thumbqc.core.errors import InvalidInputError


def corner_aligned_oracle(grid: np.ndarray, rows: int, cols: int) -> np.ndarray:
    n_r, n_c = grid.shape[:2]
    out = np.zeros((rows, cols, grid.shape[2]))
    for i in range(rows):
        y = i * (n_r - 1) / (rows - 1) if rows > 1 else 0.0
        y0 = min(int(np.floor(y)), n_r - 1)
        y1 = min(y0 + 1, n_r - 1)
        wy = y - y0
        for j in range(cols):
            x = j * (n_c - 1) / (cols - 1) if cols > 1 else 0.0
            x0 = min(int(np.floor(x)), n_c - 1)
            x1 = min(x0 + 1, n_c - 1)
            wx = x - x0
            out[i, j] = (
                (1 - wy) * ((1 - wx) * grid[y0, x0] + wx * grid[y0, x1])
                + wy * ((1 - wx) * grid[y1, x0] + wx * grid[y1, x1])
            )
    return out


class TestPositionInterpolation:
    def test_same_grid_is_bit_exact(self):
        grid = torch.randn(14, 14, 8)
        assert torch.equal(interpolate_grid(grid, 14, 14), grid)

    def test_corners_are_preserved_exactly(self):
        grid = torch.randn(14, 14, 8)
        out = interpolate_grid(grid, 28, 56)
        assert out.shape == (28, 56, 8)
        for (r, c), (rr, cc) in [((0, 0), (0, 0)), ((0, -1), (0, -1)), ((-1, 0), (-1, 0)), ((-1, -1), (-1, -1))]:
            assert torch.equal(out[rr, cc], grid[r, c])

    def test_matches_corner_aligned_oracle(self):
        grid = torch.randn(14, 14, 4, dtype=torch.float64)
        out = interpolate_grid(grid, 28, 56).numpy()
        assert np.max(np.abs(out - corner_aligned_oracle(grid.numpy(), 28, 56))) < 1e-6

    def test_three_by_three_center_is_corner_mean(self):
        grid = torch.randn(2, 2, 5, dtype=torch.float64)
        out = interpolate_grid(grid, 3, 3)
        torch.testing.assert_close(out[1, 1], grid.reshape(4, 5).mean(dim=0))

    def test_shrinking_matches_oracle(self):
        grid = torch.randn(6, 9, 3, dtype=torch.float64)
        out = interpolate_grid(grid, 4, 5).numpy()
        assert np.max(np.abs(out - corner_aligned_oracle(grid.numpy(), 4, 5))) < 1e-6

    def test_extra_tokens_pass_through(self):
        extra = torch.randn(3, 8)
        grid = PositionalGrid(14, 14, torch.randn(14, 14, 8), extra)
        resized = interpolate_pos_embed(grid, 28, 56)
        assert (resized.rows, resized.cols) == (28, 56)
        assert torch.equal(resized.extra_tokens, extra)

    def test_invalid_size_is_rejected(self):
        with pytest.raises(InvalidInputError):
            interpolate_grid(torch.zeros(2, 2, 1), 0, 4)

    def test_mismatched_grid_is_rejected(self):
        with pytest.raises(InvalidInputError):
            PositionalGrid(3, 3, torch.zeros(2, 3, 4), torch.zeros(1, 4))

    def test_non_finite_embeddings_are_rejected(self):
        emb = torch.zeros(2, 2, 4)
        emb[0, 0, 0] = float("nan")
        with pytest.raises(InvalidInputError):
            PositionalGrid(2, 2, emb, torch.zeros(1, 4))


class TestVisionTransformer:
    def test_class_token_output(self, desk_config):
        model = build_backbone(desk_config).eval()
        assert model(torch.randn(2, 3, 224, 224)).shape == (2, desk_config.embed_dim)

    def test_class_plus_mean_patch_doubles_width(self, tiny_registers_config):
        model = build_backbone(tiny_registers_config).eval()
        assert model(torch.randn(3, 3, 32, 32)).shape == (3, 32)
        assert tiny_registers_config.feature_dim == 32

    def test_register_tokens_are_left_out_of_the_patch_mean(self, tiny_registers_config):
        cfg = tiny_registers_config.model_copy(update={"depth": 0})
        model = build_backbone(cfg, seed=1).eval()
        x = torch.randn(2, 3, 32, 32)
        with torch.no_grad():
            before = model(x)
            patch_tokens = model.norm(model.patch_embed(x))[:, 3:]
            model.register_tokens.add_(10.0 * torch.randn_like(model.register_tokens))
            after = model(x)
            with_registers = model.norm(model.patch_embed(x))[:, 1:].mean(dim=1)
        assert torch.equal(before[:, 16:], after[:, 16:])
        torch.testing.assert_close(after[:, 16:], patch_tokens.mean(dim=1))
        assert not torch.allclose(with_registers, after[:, 16:])

    def test_eval_forward_is_deterministic(self, desk_config):
        x = torch.randn(2, 3, 224, 224)
        model = build_backbone(desk_config, seed=5).eval()
        with torch.no_grad():
            first = model(x)
            second = model(x)
            rebuilt = build_backbone(desk_config, seed=5).eval()(x)
        assert torch.equal(first, second)
        assert torch.equal(first, rebuilt)

    def test_register_tokens_extend_the_sequence(self, tiny_registers_config):
        model = build_backbone(tiny_registers_config)
        tokens = model.patch_embed(torch.randn(1, 3, 32, 64))
        assert tokens.shape == (1, 1 + 2 + 2 * 4, 16)

    @pytest.mark.parametrize(
        "patch, height, width, n_patches", [(16, 224, 224, 196), (14, 224, 224, 256), (16, 448, 896, 1568)]
    )
    def test_patch_token_counts(self, patch, height, width, n_patches):
        cfg = BackboneConfig(patch_size=patch, depth=0, heads=1, embed_dim=8, image_size=224)
        tokens = build_backbone(cfg).patch_embed(torch.zeros(1, 3, height, width))
        assert tokens.shape == (1, 1 + n_patches, 8)

    def test_non_square_input_uses_interpolated_grid(self, desk_config):
        model = build_backbone(desk_config).eval()
        assert model(torch.randn(1, 3, 224, 448)).shape == (1, 64)
        assert model.grid_shape == (14, 14)

    def test_resize_grid_is_permanent(self, desk_config):
        model = build_backbone(desk_config)
        before = model.pos_embed.detach().clone()
        model.resize_grid(28, 56)
        assert model.grid_shape == (28, 56)
        assert torch.equal(model.pos_embed[0, 0], before[0, 0])
        assert torch.equal(model.pos_embed[-1, -1], before[-1, -1])

    def test_seeded_construction_is_reproducible(self, tiny_config):
        a, b = build_backbone(tiny_config, seed=5), build_backbone(tiny_config, seed=5)
        for (name, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert torch.equal(pa, pb), name

    def test_indivisible_input_is_rejected(self, tiny_config):
        with pytest.raises(InvalidInputError):
            build_backbone(tiny_config)(torch.randn(1, 3, 30, 32))

    def test_wrong_channel_count_is_rejected(self, tiny_config):
        with pytest.raises(InvalidInputError):
            build_backbone(tiny_config)(torch.randn(1, 4, 32, 32))

    def test_zero_depth_returns_normed_class_token(self):
        cfg = BackboneConfig(patch_size=16, depth=0, heads=1, embed_dim=8, image_size=32)
        model = build_backbone(cfg).eval()
        out = model(torch.randn(2, 3, 32, 32))
        expected = model.norm(model.cls_token[0].expand(2, -1))
        torch.testing.assert_close(out, expected)


class TestConfig:
    def test_presets_are_consistent(self):
        assert BACKBONE_PRESETS["uni"].feature_dim == 2048
        assert BACKBONE_PRESETS["h_optimus_0"].n_register_tokens == 4
        assert BACKBONE_PRESETS["desk"].grid_size == 14

    def test_indivisible_geometry_is_rejected(self):
        with pytest.raises(ValueError):
            BackboneConfig(patch_size=16, image_size=100)
        with pytest.raises(ValueError):
            BackboneConfig(embed_dim=10, heads=4)


class TestFreezing:
    def test_full_mode_trains_everything(self, tiny_config):
        mask = freeze_mask(tiny_config, FreezeMode.full)
        assert mask.frozen == []
        assert mask.trainable == parameter_names(tiny_config)

    def test_attention_and_position_mode(self, tiny_config):
        mask = freeze_mask(tiny_config, FreezeMode.attention_and_pos)
        assert "pos_embed" in mask.trainable
        assert all(".attn." in n or n == "pos_embed" for n in mask.trainable)
        for name in ("cls_token", "patch_proj.weight", "blocks.0.mlp.fc1.weight", "norm.weight"):
            assert name in mask.frozen

    def test_apply_mask_sets_requires_grad(self, tiny_config):
        model = build_backbone(tiny_config)
        mask = freeze_mask(tiny_config, "attention_and_pos")
        apply_mask(model, mask)
        for name, param in model.named_parameters():
            assert param.requires_grad == mask.flags[name]

    def test_mask_for_another_schema_is_rejected(self, tiny_config, tiny_registers_config):
        model = build_backbone(tiny_config)
        with pytest.raises(InvalidInputError) as exc:
            apply_mask(model, freeze_mask(tiny_registers_config, FreezeMode.full))
        assert exc.value.detail["unexpected"] == ["register_tokens"]

    def test_output_mode_enum_values(self):
        assert OutputMode("class_plus_mean_patch") is OutputMode.class_plus_mean_patch
