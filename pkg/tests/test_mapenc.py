import numpy as np
import pytest

from scanloc.errors import InputFormatError, InvalidArgumentError
from scanloc.io import write_image_gray
from scanloc.mapenc import (
    MapPatch,
    default_stride,
    load_map,
    map_features,
    map_skeleton,
    otsu_threshold,
    sobel_gradients,
)


def step_patch(size=64, level_lo=0.0, level_hi=1.0):
    """Left half dark, right half bright: one vertical edge."""
    lum = np.full((size, size), level_lo)
    lum[:, size // 2:] = level_hi
    return MapPatch(lum)


class TestMapPatch:
    def test_pure_red_luma(self):
        rgb = np.zeros((4, 4, 3), dtype=np.uint8)
        rgb[:, :, 0] = 255
        patch = MapPatch.from_rgb(rgb)
        assert np.allclose(patch.luminance, 0.299)

    def test_gray_scaling(self):
        gray = np.full((4, 4), 51, dtype=np.uint8)
        patch = MapPatch.from_gray(gray)
        assert np.allclose(patch.luminance, 0.2)

    def test_rejects_non_square(self):
        with pytest.raises(InputFormatError):
            MapPatch(np.zeros((4, 6)))

    def test_rejects_out_of_range(self):
        with pytest.raises(InputFormatError):
            MapPatch(np.full((4, 4), 1.5))

    def test_rejects_bad_rgb_shape(self):
        with pytest.raises(InputFormatError):
            MapPatch.from_rgb(np.zeros((4, 4), dtype=np.uint8))

    def test_load_map_round_trip(self, tmp_path):
        arr = np.arange(64, dtype=np.uint8).reshape(8, 8)
        path = tmp_path / "patch.png"
        write_image_gray(arr, path)
        patch = load_map(path)
        assert np.allclose(patch.luminance, arr / 255.0)


class TestDefaultStride:
    @pytest.mark.parametrize("size,expected", [(256, 4), (512, 4), (1024, 8), (2048, 8)])
    def test_values(self, size, expected):
        assert default_stride(size) == expected


class TestSobel:
    def test_vertical_step_gradient(self):
        lum = step_patch(16).luminance
        gx, gy = sobel_gradients(lum)
        assert np.allclose(gy, 0.0)
        # Only the two columns straddling the step see the edge; the jump
        # is 1, so the Sobel response is the full kernel weight 4.
        assert np.allclose(gx[:, 7], 4.0)
        assert np.allclose(gx[:, 8], 4.0)
        assert np.allclose(gx[:, :7], 0.0)
        assert np.allclose(gx[:, 9:], 0.0)

    def test_constant_image_no_gradient(self):
        gx, gy = sobel_gradients(np.full((8, 8), 0.4))
        assert np.allclose(gx, 0.0, atol=1e-12)
        assert np.allclose(gy, 0.0, atol=1e-12)


class TestOtsu:
    def test_two_level_separation(self):
        vals = np.concatenate([np.zeros(100), np.ones(50)])
        thr = otsu_threshold(vals)
        assert 0.0 < thr < 1.0
        assert np.array_equal(vals > thr, vals == 1.0)

    def test_constant_input_yields_no_foreground(self):
        vals = np.full((5, 5), 0.3)
        thr = otsu_threshold(vals)
        assert thr == 0.3
        assert not np.any(vals > thr)

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            otsu_threshold(np.zeros(0))


class TestMapFeatures:
    def test_output_shape(self):
        feat = map_features(step_patch(64), stride=4)
        assert feat.values.shape == (16, 16, 8)

    def test_rejects_bad_stride(self):
        with pytest.raises(InvalidArgumentError):
            map_features(step_patch(64), stride=5)

    def test_rejects_too_few_channels(self):
        with pytest.raises(InvalidArgumentError):
            map_features(step_patch(64), stride=4, channels=4)

    def test_vertical_edge_energy_lands_in_90_degree_bin(self):
        feat = map_features(step_patch(64), stride=4)
        # Oriented-energy bins cover 0/45/90/135 degrees as channels 3..6.
        # A vertical edge excites only the 90-degree bin; the other three
        # stay identically zero, which the variance floor preserves.
        assert np.count_nonzero(feat.values[:, :, 3]) == 0
        assert np.count_nonzero(feat.values[:, :, 4]) == 0
        assert np.count_nonzero(feat.values[:, :, 6]) == 0
        assert np.count_nonzero(feat.values[:, :, 5]) > 0

    def test_brightness_ordering_survives_standardization(self):
        feat = map_features(step_patch(64, 0.2, 0.8), stride=4)
        mean_lum = feat.values[:, :, 0]
        assert mean_lum[:, 12:].min() > mean_lum[:, :4].max()

    def test_stride_one_mean_channel_is_standardized_luminance(self):
        rng = np.random.default_rng(3)
        lum = rng.random((16, 16))
        feat = map_features(MapPatch(lum), stride=1)
        expected = (lum - lum.mean()) / lum.std()
        assert np.allclose(feat.values[:, :, 0], expected)
        # A 1-pixel window has no spread, so the std channel is all zero.
        assert np.count_nonzero(feat.values[:, :, 1]) == 0


class TestMapSkeleton:
    def test_skeleton_hugs_the_edge(self):
        mask = map_skeleton(step_patch(64), stride=4)
        skel = mask.channel(1) > 0.5
        rows, cols = np.nonzero(skel)
        assert len(rows) > 0
        assert set(cols) <= {7, 8}

    def test_channels_sum_to_one(self):
        mask = map_skeleton(step_patch(64), stride=4)
        assert np.allclose(mask.channel(0) + mask.channel(1), 1.0, atol=0)

    def test_constant_patch_has_empty_skeleton(self):
        mask = map_skeleton(MapPatch(np.full((32, 32), 0.5)), stride=4)
        assert not np.any(mask.channel(1) > 0.5)

    def test_shape_and_clamp(self):
        mask = map_skeleton(step_patch(64), stride=4)
        assert mask.values.shape == (16, 16, 2)
        assert mask.channel(1).max() <= 1.0
        assert mask.channel(1).min() > 0.0
