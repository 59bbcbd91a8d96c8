import math

import numpy as np
import pytest

from modules.errors import DimensionError, ParameterError
from modules.fovea_geometry import PixelGrid, RectParams, build_rect_layout
from modules.quality_metrics import (
    RoiMask,
    masked_mse,
    normalize_for_display,
    psnr,
    score_image,
    smooth_nroi,
    ssim,
)


def test_psnr_identical_images_is_infinite(rng):
    img = rng.random((10, 10))
    assert psnr(img, img.copy()) == math.inf


def test_psnr_known_value():
    ref = np.zeros((12, 12))
    assert psnr(np.full((12, 12), 0.1), ref) == pytest.approx(20.0, abs=1e-9)
    assert psnr(np.full((12, 12), 25.5), ref, peak=255.0) == pytest.approx(20.0, abs=1e-9)


def test_masked_mse_matches_direct_sum(rng):
    img, ref = rng.random((9, 11)), rng.random((9, 11))
    roi = RoiMask.from_box(PixelGrid(11, 9), (3, 2, 8, 6))
    total, count = 0.0, 0
    for y in range(1, 6):
        for x in range(2, 8):
            total += (img[y, x] - ref[y, x]) ** 2
            count += 1
    assert masked_mse(img, ref, roi) == pytest.approx(total / count, rel=1e-12)
    assert roi.pixel_count == count


def test_ssim_identical_is_one(rng):
    img = rng.random((20, 20))
    assert ssim(img, img.copy()) == pytest.approx(1.0, abs=1e-12)


def test_ssim_inverted_checkerboard_is_negative():
    board = (np.add.outer(np.arange(16), np.arange(16)) % 2).astype(float)
    assert ssim(board, 1.0 - board) < 0


def test_ssim_constant_images_closed_form():
    c, d = 0.4, 0.2
    c1 = 0.01 ** 2
    expected = (2 * c * (c + d) + c1) / (c ** 2 + (c + d) ** 2 + c1)
    assert ssim(np.full((12, 12), c), np.full((12, 12), c + d)) == pytest.approx(expected, rel=1e-12)


def test_ssim_uses_only_windows_inside_the_mask(rng):
    ref = rng.random((24, 24))
    img = ref.copy()
    img[:, 12:] = 0.0
    left = RoiMask.from_box(PixelGrid(24, 24), (1, 1, 12, 24))
    assert ssim(img, ref, left) == pytest.approx(1.0, abs=1e-12)
    assert ssim(img, ref) < 1.0


def test_ssim_rejects_masks_smaller_than_a_window():
    roi = RoiMask.from_box(PixelGrid(20, 20), (5, 5, 10, 16))
    with pytest.raises(ParameterError):
        ssim(np.ones((20, 20)), np.ones((20, 20)), roi)


def test_empty_masks_are_rejected():
    with pytest.raises(ParameterError):
        RoiMask(np.zeros((4, 4), dtype=bool))
    with pytest.raises(ParameterError):
        psnr(np.ones((4, 4)), np.zeros((4, 4)), np.zeros((4, 4), dtype=bool))
    with pytest.raises(ParameterError):
        RoiMask.from_box(PixelGrid(8, 8), (5, 5, 9, 6))
    with pytest.raises(DimensionError):
        masked_mse(np.ones((4, 4)), np.ones((4, 5)))


def test_roi_from_layout_is_the_fovea():
    layout = build_rect_layout(RectParams(center=(10, 8), m0=3, n0=2), PixelGrid(20, 16))
    roi = RoiMask.from_layout(layout)
    assert roi.pixel_count == 7 * 5
    assert np.array_equal(roi.mask, RoiMask.from_box(layout.grid, (7, 6, 13, 10)).mask)


@pytest.fixture
def corner_fovea():
    return build_rect_layout(RectParams(center=(10, 10), m0=2, n0=2, alpha1=1.3, alpha2=1.3), PixelGrid(64, 64))


def test_smooth_nroi_keeps_fovea_pixels(corner_fovea, rng):
    img = rng.random((64, 64))
    out = smooth_nroi(img, corner_fovea, sigma=1.5)
    fovea = corner_fovea.fovea_pixel_mask()
    assert np.array_equal(out[fovea], img[fovea])
    assert not np.allclose(out[~fovea], img[~fovea])


def test_smooth_nroi_leaves_constant_image(corner_fovea):
    out = smooth_nroi(np.full((64, 64), 0.3), corner_fovea, sigma=2.0)
    np.testing.assert_allclose(out, 0.3, rtol=1e-12)


def test_smooth_nroi_impulse_keeps_unit_mass(corner_fovea):
    img = np.zeros((64, 64))
    img[44, 44] = 1.0
    out = smooth_nroi(img, corner_fovea, sigma=2.0)
    assert out.sum() == pytest.approx(1.0, abs=1e-9)
    assert out[44, 44] < 1.0


def test_smooth_nroi_rejects_bad_sigma(corner_fovea):
    with pytest.raises(ParameterError):
        smooth_nroi(np.zeros((64, 64)), corner_fovea, sigma=0)


def test_normalize_for_display():
    out = normalize_for_display(np.array([[2.0, 4.0], [3.0, 6.0]]))
    assert out.min() == 0.0 and out.max() == 1.0
    assert np.array_equal(normalize_for_display(np.full((3, 3), 7.0)), np.zeros((3, 3)))


def test_score_image_keys(rng):
    ref = rng.random((16, 16))
    roi = RoiMask.from_box(PixelGrid(16, 16), (3, 3, 14, 14))
    scores = score_image(ref + 0.01, ref, roi)
    assert set(scores) == {'roi_psnr_db', 'roi_ssim', 'roi_mse', 'global_psnr_db'}
    assert scores['roi_psnr_db'] == pytest.approx(40.0, abs=1e-6)


def test_ssim_on_a_small_disc_scores_its_bounding_box(rng):
    ref = rng.random((20, 20))
    disc = RoiMask.from_disc(PixelGrid(20, 20), (10.5, 10.5), 4.5)
    assert ssim(ref.copy(), ref, disc) == pytest.approx(1.0, abs=1e-12)


def test_score_image_reports_nan_ssim_for_tiny_roi(rng):
    ref = rng.random((16, 16))
    tiny = RoiMask.from_box(PixelGrid(16, 16), (5, 5, 9, 9))
    scores = score_image(ref + 0.1, ref, tiny)
    assert math.isnan(scores['roi_ssim'])
    assert scores['roi_psnr_db'] == pytest.approx(20.0, abs=1e-6)
