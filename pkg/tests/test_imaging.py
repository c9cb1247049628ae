import numpy as np
import pytest

from thumbqc.core.errors import InvalidInputError, PreconditionError
from thumbqc.imaging import (
    CANONICAL_HEIGHT,
    CANONICAL_WIDTH,
    SCALES,
    RasterImage,
    ScaleName,
    bilinear_resize,
    canonicalize,
    fit_longest_side,
    get_scale,
    load_thumbnail,
    normalize,
    orient_landscape,
    preprocess_slide,
    resize_to_scale,
    save_raster,
    stitch,
    stretch_to_canonical,
    synthetic_thumbnail,
    tile,
)
from thumbqc.schemas.manifest import Label


def random_image(rng, height, width):
    return RasterImage(rng.random((height, width, 3)).astype(np.float32))


def bilinear_oracle(data: np.ndarray, height: int, width: int) -> np.ndarray:
    in_h, in_w = data.shape[:2]
    src = data.astype(np.float64)
    out = np.zeros((height, width, 3))

    def axis(dst, n_in, n_out):
        s = (dst + 0.5) * n_in / n_out - 0.5
        s = max(s, 0.0)
        i0 = min(int(np.floor(s)), n_in - 1)
        i1 = min(i0 + 1, n_in - 1)
        return i0, i1, s - i0

    for y in range(height):
        y0, y1, ly = axis(y, in_h, height)
        for x in range(width):
            x0, x1, lx = axis(x, in_w, width)
            top = (1 - lx) * src[y0, x0] + lx * src[y0, x1]
            bottom = (1 - lx) * src[y1, x0] + lx * src[y1, x1]
            out[y, x] = (1 - ly) * top + ly * bottom
    return out


class TestScales:
    def test_tile_counts(self):
        assert [SCALES[s].n_tiles for s in ScaleName] == [1, 2, 8, 32]

    def test_target_sizes(self):
        assert (get_scale("XS").target_height, get_scale("XS").target_width) == (224, 224)
        assert (get_scale("L").target_height, get_scale("L").target_width) == (CANONICAL_HEIGHT, CANONICAL_WIDTH)


class TestBilinearResize:
    def test_matches_oracle_on_seeded_images(self, rng):
        for _ in range(50):
            img = random_image(rng, int(rng.integers(1, 12)), int(rng.integers(1, 12)))
            h, w = int(rng.integers(1, 16)), int(rng.integers(1, 16))
            got = bilinear_resize(img, h, w).data
            assert got.shape == (h, w, 3)
            assert np.max(np.abs(got - bilinear_oracle(img.data, h, w))) < 1e-6

    def test_same_size_is_identity(self, rng):
        img = random_image(rng, 5, 7)
        assert bilinear_resize(img, 5, 7) is img

    def test_constant_image_stays_constant(self):
        out = bilinear_resize(RasterImage.constant(3, 5, 0.25), 17, 9)
        assert np.all(out.data == np.float32(0.25))

    def test_output_within_input_range(self, rng):
        img = random_image(rng, 6, 6)
        out = bilinear_resize(img, 23, 11).data
        assert out.min() >= img.data.min() and out.max() <= img.data.max()

    def test_rejects_empty_and_invalid_sizes(self, rng):
        with pytest.raises(InvalidInputError):
            bilinear_resize(RasterImage(np.zeros((0, 4, 3), dtype=np.float32)), 2, 2)
        with pytest.raises(InvalidInputError):
            bilinear_resize(random_image(rng, 2, 2), 0, 3)


class TestOrientation:
    def test_portrait_rotates_clockwise(self, rng):
        img = random_image(rng, 5, 3)
        out = orient_landscape(img)
        assert out.shape == (3, 5)
        h = img.height
        for r in range(out.height):
            for c in range(out.width):
                assert np.array_equal(out.data[r, c], img.data[h - 1 - c, r])

    def test_idempotent(self, rng):
        for shape in [(5, 3), (3, 5), (4, 4)]:
            once = orient_landscape(random_image(rng, *shape))
            assert np.array_equal(orient_landscape(once).data, once.data)

    def test_square_and_landscape_unchanged(self, rng):
        for shape in [(4, 4), (2, 9)]:
            img = random_image(rng, *shape)
            assert np.array_equal(orient_landscape(img).data, img.data)


class TestCanonicalStretch:
    def test_stretches_to_canonical(self, rng):
        out = stretch_to_canonical(random_image(rng, 30, 50))
        assert out.shape == (CANONICAL_HEIGHT, CANONICAL_WIDTH)

    def test_sampled_pixels_match_oracle(self, rng):
        img = random_image(rng, 7, 13)
        out = stretch_to_canonical(img).data
        for _ in range(64):
            y, x = int(rng.integers(0, CANONICAL_HEIGHT)), int(rng.integers(0, CANONICAL_WIDTH))
            sy = max((y + 0.5) * 7 / CANONICAL_HEIGHT - 0.5, 0.0)
            sx = max((x + 0.5) * 13 / CANONICAL_WIDTH - 0.5, 0.0)
            y0, x0 = min(int(sy), 6), min(int(sx), 12)
            y1, x1 = min(y0 + 1, 6), min(x0 + 1, 12)
            ly, lx = sy - y0, sx - x0
            d = img.data.astype(np.float64)
            full = (1 - ly) * ((1 - lx) * d[y0, x0] + lx * d[y0, x1]) + ly * ((1 - lx) * d[y1, x0] + lx * d[y1, x1])
            assert np.max(np.abs(out[y, x] - full)) < 1e-6

    def test_canonical_input_unchanged(self, rng):
        img = random_image(rng, CANONICAL_HEIGHT, CANONICAL_WIDTH)
        assert np.array_equal(stretch_to_canonical(img).data, img.data)

    def test_portrait_is_a_precondition_error(self, rng):
        with pytest.raises(PreconditionError):
            stretch_to_canonical(random_image(rng, 9, 4))


class TestResizeToScale:
    def test_l_is_identity(self, rng):
        img = random_image(rng, CANONICAL_HEIGHT, CANONICAL_WIDTH)
        assert np.array_equal(resize_to_scale(img, get_scale("L")).data, img.data)

    @pytest.mark.parametrize("name, shape", [("XS", (224, 224)), ("S", (224, 448)), ("M", (448, 896))])
    def test_target_shapes(self, rng, name, shape):
        img = random_image(rng, CANONICAL_HEIGHT, CANONICAL_WIDTH)
        assert resize_to_scale(img, get_scale(name)).shape == shape

    def test_requires_canonical_input(self, rng):
        with pytest.raises(PreconditionError):
            resize_to_scale(random_image(rng, 448, 896), get_scale("M"))


class TestTiling:
    @pytest.mark.parametrize("name", [s.value for s in ScaleName])
    def test_round_trip_is_bit_exact(self, rng, name):
        scale = get_scale(name)
        img = random_image(rng, scale.target_height, scale.target_width)
        batch = tile(img, scale)
        assert len(batch) == scale.n_tiles
        assert np.array_equal(stitch(batch).data, img.data)

    def test_row_major_order(self, rng):
        scale = get_scale("M")
        img = random_image(rng, scale.target_height, scale.target_width)
        batch = tile(img, scale)
        tile_5 = batch.tiles[5]  # row 1, column 1
        assert np.array_equal(tile_5.data, img.data[224:448, 224:448])

    def test_wrong_size_is_rejected(self, rng):
        with pytest.raises(InvalidInputError):
            tile(random_image(rng, 100, 100), get_scale("XS"))


class TestNormalize:
    def test_channel_first_affine(self, rng):
        img = random_image(rng, 4, 6)
        out = normalize(img, (0.1, 0.2, 0.3), (0.5, 0.25, 2.0))
        assert out.shape == (3, 4, 6)
        np.testing.assert_allclose(out[1], (img.data[:, :, 1] - 0.2) / 0.25, rtol=1e-5, atol=1e-6)

    def test_rejects_non_positive_std(self, rng):
        with pytest.raises(InvalidInputError):
            normalize(random_image(rng, 2, 2), (0.5, 0.5, 0.5), (0.5, 0.0, 0.5))


class TestPreprocessSlide:
    def test_tiled_output(self, rng):
        out = preprocess_slide(random_image(rng, 50, 30), get_scale("L"), True, (0.5,) * 3, (0.5,) * 3)
        assert out.shape == (32, 3, 224, 224)
        assert out.dtype == np.float32

    def test_whole_slide_output(self, rng):
        out = preprocess_slide(random_image(rng, 30, 50), get_scale("M"), False, (0.5,) * 3, (0.5,) * 3)
        assert out.shape == (3, 448, 896)

    def test_matches_step_by_step_pipeline(self, rng):
        img = random_image(rng, 20, 40)
        scale = get_scale("M")
        expected = [normalize(t, (0.5,) * 3, (0.5,) * 3) for t in tile(resize_to_scale(canonicalize(img), scale), scale).tiles]
        got = preprocess_slide(img, scale, True, (0.5,) * 3, (0.5,) * 3)
        assert np.array_equal(got, np.stack(expected))


class TestFitLongestSide:
    def test_downscales_preserving_aspect(self, rng):
        out = fit_longest_side(random_image(rng, 100, 4000))
        assert out.shape == (48, 1920)

    def test_small_images_unchanged(self, rng):
        img = random_image(rng, 40, 80)
        assert fit_longest_side(img) is img


class TestRasterIO:
    def test_png_round_trip_quantizes_to_8_bit(self, tmp_path, rng):
        img = random_image(rng, 6, 9)
        save_raster(img, tmp_path / "a.png")
        loaded = load_thumbnail(tmp_path / "a.png")
        assert loaded.shape == (6, 9)
        assert np.max(np.abs(loaded.data - img.data)) <= 0.5 / 255 + 1e-6

    def test_ppm_is_accepted(self, tmp_path):
        from PIL import Image

        pixels = np.zeros((3, 4, 3), dtype=np.uint8)
        pixels[1, 2] = (255, 0, 51)
        Image.fromarray(pixels).save(tmp_path / "a.ppm", format="PPM")
        loaded = load_thumbnail(tmp_path / "a.ppm")
        np.testing.assert_allclose(loaded.data[1, 2], (1.0, 0.0, 0.2), atol=1e-7)

    @pytest.mark.parametrize("dtype", [np.uint16, np.int32])
    def test_sixteen_bit_greyscale_is_rescaled(self, tmp_path, dtype):
        from PIL import Image

        grey = np.array([[0, 32768, 65535]], dtype=dtype)
        Image.fromarray(grey).save(tmp_path / "a.png", format="PNG")
        loaded = load_thumbnail(tmp_path / "a.png")
        np.testing.assert_allclose(loaded.data[0, :, 0], [0.0, 32768 / 65535, 1.0], atol=1e-6)
        assert np.array_equal(loaded.data[..., 0], loaded.data[..., 2])

    def test_decompression_bomb_is_invalid_input(self, tmp_path, rng, monkeypatch):
        from PIL import Image

        save_raster(random_image(rng, 6, 9), tmp_path / "big.png")
        monkeypatch.setattr(Image, "MAX_IMAGE_PIXELS", 10)
        with pytest.raises(InvalidInputError):
            load_thumbnail(tmp_path / "big.png")

    def test_corrupt_file_is_invalid_input(self, tmp_path):
        (tmp_path / "bad.png").write_bytes(b"\x89PNG\r\n\x1a\nnot really a png")
        with pytest.raises(InvalidInputError):
            load_thumbnail(tmp_path / "bad.png")

    def test_missing_file_is_invalid_input(self, tmp_path):
        with pytest.raises(InvalidInputError):
            load_thumbnail(tmp_path / "missing.png")

    def test_jpeg_is_rejected(self, tmp_path):
        from PIL import Image

        Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(tmp_path / "a.jpg", format="JPEG")
        with pytest.raises(InvalidInputError):
            load_thumbnail(tmp_path / "a.jpg")

    def test_out_of_range_raster_is_rejected(self):
        with pytest.raises(InvalidInputError):
            RasterImage(np.full((2, 2, 3), 1.5, dtype=np.float32))


class TestSyntheticThumbnails:
    def test_seeded_generation_is_reproducible(self):
        a = synthetic_thumbnail(Label.FS, np.random.default_rng(3))
        b = synthetic_thumbnail(Label.FS, np.random.default_rng(3))
        assert np.array_equal(a.data, b.data)

    def test_classes_differ_in_texture(self):
        rng = np.random.default_rng(5)
        ffpe = synthetic_thumbnail(Label.FFPE, rng).data
        fs = synthetic_thumbnail(Label.FS, rng).data
        # neighbouring-pixel differences are far larger for the speckled class
        assert np.abs(np.diff(fs, axis=1)).mean() > 2 * np.abs(np.diff(ffpe, axis=1)).mean()
