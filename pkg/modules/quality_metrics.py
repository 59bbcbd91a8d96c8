# modules/quality_metrics.py
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import gaussian_filter
from skimage.metrics import mean_squared_error, peak_signal_noise_ratio

from modules.errors import DimensionError, ParameterError
from modules.fovea_geometry import CellLayout, PixelGrid

logger = logging.getLogger(__name__)

SSIM_WINDOW = 8


@dataclass(frozen=True, eq=False)
class RoiMask:
    """Boolean (Y, X) region where ROI metrics are taken, plus how it was derived"""
    mask: np.ndarray
    note: str = ''

    def __post_init__(self):
        mask = np.ascontiguousarray(self.mask, dtype=bool)
        if mask.ndim != 2:
            raise DimensionError(f"ROI mask must be 2D, got shape {mask.shape}")
        if not mask.any():
            raise ParameterError(f"ROI mask is empty ({self.note or 'no derivation note'})")
        mask.flags.writeable = False
        object.__setattr__(self, 'mask', mask)

    @property
    def pixel_count(self) -> int:
        return int(self.mask.sum())

    @classmethod
    def from_layout(cls, layout: CellLayout) -> 'RoiMask':
        return cls(layout.fovea_pixel_mask(), note=f"fovea cells of the {layout.structure} layout")

    @classmethod
    def from_box(cls, grid: PixelGrid, box: Sequence[int]) -> 'RoiMask':
        """box = (x0, y0, x1, y1), 1-based inclusive"""
        x0, y0, x1, y1 = (int(v) for v in box)
        if not (1 <= x0 <= x1 <= grid.X and 1 <= y0 <= y1 <= grid.Y):
            raise ParameterError(f"ROI box {tuple(box)} does not fit the {grid.X}x{grid.Y} grid")
        mask = np.zeros(grid.shape, dtype=bool)
        mask[y0 - 1:y1, x0 - 1:x1] = True
        return cls(mask, note=f"box x={x0}..{x1}, y={y0}..{y1}")

    @classmethod
    def from_disc(cls, grid: PixelGrid, center: Tuple[float, float], radius: float) -> 'RoiMask':
        xs, ys = grid.coordinates()
        mask = (np.hypot(xs - center[0], ys - center[1]) <= radius).reshape(grid.shape)
        return cls(mask, note=f"disc r={radius:g} at {tuple(center)}")

    @classmethod
    def full(cls, grid: PixelGrid) -> 'RoiMask':
        return cls(np.ones(grid.shape, dtype=bool), note="whole field of view")


def _resolve_mask(mask, shape: Tuple[int, ...]) -> np.ndarray:
    if mask is None:
        return np.ones(shape, dtype=bool)
    m = mask.mask if isinstance(mask, RoiMask) else np.asarray(mask, dtype=bool)
    if m.shape != shape:
        raise DimensionError(f"mask shape {m.shape} does not match image {shape}")
    if not m.any():
        raise ParameterError("metric mask selects no pixels")
    return m


def _pair(img, ref) -> Tuple[np.ndarray, np.ndarray]:
    img = np.asarray(img, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if img.shape != ref.shape:
        raise DimensionError(f"image shapes differ: {img.shape} vs {ref.shape}")
    return img, ref


def masked_mse(img, ref, mask: Optional[RoiMask] = None) -> float:
    img, ref = _pair(img, ref)
    m = _resolve_mask(mask, img.shape)
    return float(mean_squared_error(ref[m], img[m]))


def psnr(img, ref, mask: Optional[RoiMask] = None, peak: float = 1.0) -> float:
    """10·log10(peak² / MSE) over the masked pixels; identical images give math.inf"""
    if peak <= 0:
        raise ParameterError(f"peak must be positive, got {peak}")
    img, ref = _pair(img, ref)
    m = _resolve_mask(mask, img.shape)
    if mean_squared_error(ref[m], img[m]) == 0:
        return math.inf
    return float(peak_signal_noise_ratio(ref[m], img[m], data_range=peak))


def ssim(img, ref, mask: Optional[RoiMask] = None, peak: float = 1.0, window: int = SSIM_WINDOW) -> float:
    """
    Mean SSIM over all window×window patches (stride 1) lying fully inside the mask,
    or over every patch of the mask's bounding box when none fits inside it.
    Statistics are population (1/n) moments; C1 = (0.01·peak)², C2 = (0.03·peak)².
    """
    img, ref = _pair(img, ref)
    m = _resolve_mask(mask, img.shape)
    if img.ndim != 2:
        raise DimensionError("SSIM needs 2D images")

    # crop to the mask's bounding box
    rows = np.flatnonzero(m.any(axis=1))
    cols = np.flatnonzero(m.any(axis=0))
    sl = (slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1))
    x, y, m = img[sl], ref[sl], m[sl]
    if x.shape[0] < window or x.shape[1] < window:
        raise ParameterError(f"mask is smaller than one {window}x{window} SSIM window")

    inside = sliding_window_view(m, (window, window)).all(axis=(-2, -1))
    if not inside.any():
        # round or rotated regions narrower than a window: score the bounding box
        logger.debug("no %dx%d window inside the mask; using its bounding box", window, window)
        inside = np.ones_like(inside)

    xw = sliding_window_view(x, (window, window))[inside]
    yw = sliding_window_view(y, (window, window))[inside]
    mu_x = xw.mean(axis=(-2, -1))
    mu_y = yw.mean(axis=(-2, -1))
    dx = xw - mu_x[:, None, None]
    dy = yw - mu_y[:, None, None]
    var_x = (dx * dx).mean(axis=(-2, -1))
    var_y = (dy * dy).mean(axis=(-2, -1))
    cov = (dx * dy).mean(axis=(-2, -1))

    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    s = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / ((mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2))
    return float(s.mean())


def smooth_nroi(img, layout: CellLayout, sigma: float) -> np.ndarray:
    """
    Gaussian display filter on periphery pixels only.
    Normalized convolution (blur(img) / blur(1), zero outside the grid) keeps the
    kernel mass at 1 near image borders; fovea pixels are copied unchanged.
    """
    if not sigma > 0:
        raise ParameterError(f"display filter sigma must be > 0, got {sigma}")
    img = np.asarray(img, dtype=float)
    if img.shape != layout.grid.shape:
        raise DimensionError(f"image shape {img.shape} does not match grid {layout.grid.shape}")

    blurred = gaussian_filter(img, sigma=sigma, mode='constant', cval=0.0, truncate=3.0)
    support = gaussian_filter(np.ones_like(img), sigma=sigma, mode='constant', cval=0.0, truncate=3.0)
    out = img.copy()
    periphery = ~layout.fovea_pixel_mask()
    out[periphery] = blurred[periphery] / support[periphery]
    return out


def normalize_for_display(img) -> np.ndarray:
    """Min-max stretch to [0, 1]; a flat image maps to 0"""
    img = np.asarray(img, dtype=float)
    lo, hi = float(img.min()), float(img.max())
    if hi <= lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def score_image(img, ref, roi: RoiMask, peak: float = 1.0) -> Dict[str, float]:
    """ROI PSNR/SSIM/MSE plus global PSNR for one reconstruction; SSIM is NaN for ROIs smaller than a window"""
    try:
        roi_ssim = ssim(img, ref, roi, peak)
    except ParameterError as e:
        logger.warning("ROI SSIM skipped: %s", e)
        roi_ssim = math.nan
    return {
        'roi_psnr_db': psnr(img, ref, roi, peak),
        'roi_ssim': roi_ssim,
        'roi_mse': masked_mse(img, ref, roi),
        'global_psnr_db': psnr(img, ref, None, peak),
    }
