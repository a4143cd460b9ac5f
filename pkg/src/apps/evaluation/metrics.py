"""
Image quality metrics: PSNR, windowed SSIM and the directional consistency score
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import NDArray

from src.apps.core.exceptions import DimensionError, ParameterError
from src.apps.core.layers import Array

PSNR_CAP = 99.0
SSIM_WINDOW = 7
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
LUMA = np.array([0.2126, 0.7152, 0.0722])


def _same_shape(a: Array, b: Array) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"Images differ in shape: {a.shape} vs {b.shape}")


def mse(a: Array, b: Array) -> float:
    _same_shape(a, b)
    return float(np.mean((np.asarray(a, dtype=np.float64) - b) ** 2))


def psnr(a: Array, b: Array) -> float:
    """
    10 log10(1 / MSE) in dB for images in [0, 1]; identical images give +inf
    """
    error = mse(a, b)
    if error == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / error))


def capped(value: float, cap: float = PSNR_CAP) -> float:
    return float(min(value, cap))


def ssim(a: Array, b: Array, window: int = SSIM_WINDOW) -> float:
    """
    Mean SSIM over all valid window positions and channels, uniform window,
    population statistics
    """
    _same_shape(a, b)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    if a.shape[0] < window or a.shape[1] < window:
        raise ParameterError(f"Images {a.shape[:2]} are smaller than the {window}x{window} window")

    def local_mean(x: Array) -> Array:
        return sliding_window_view(x, (window, window), axis=(0, 1)).mean(axis=(-2, -1))

    mu_a, mu_b = local_mean(a), local_mean(b)
    var_a = local_mean(a * a) - mu_a**2
    var_b = local_mean(b * b) - mu_b**2
    cov = local_mean(a * b) - mu_a * mu_b
    numerator = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    denominator = (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(numerator / denominator))


def luminance(img: Array) -> Array:
    return img @ LUMA if img.ndim == 3 else img


def directional_consistency(relit: Array, fg_mask: NDArray, light_dir) -> float:
    """
    (lit - dark) / (lit + dark + 1e-6) over mean foreground luminance, with the
    mask split through its centroid perpendicular to the light's image-plane
    direction
    """
    fg_mask = np.asarray(fg_mask, dtype=bool)
    if fg_mask.shape != relit.shape[:2]:
        raise DimensionError(f"Mask {fg_mask.shape} does not match image {relit.shape[:2]}")
    if not fg_mask.any():
        raise ParameterError("Foreground mask is empty")
    planar = np.asarray(light_dir, dtype=np.float64)[:2]
    if np.linalg.norm(planar) < 1e-9:
        raise ParameterError("Light direction has no image-plane component")
    rows, cols = np.nonzero(fg_mask)
    side = (cols - cols.mean()) * planar[0] + (rows - rows.mean()) * planar[1]
    lum = luminance(relit)[rows, cols]
    lit = float(lum[side > 0].mean()) if np.any(side > 0) else 0.0
    dark = float(lum[side < 0].mean()) if np.any(side < 0) else 0.0
    return (lit - dark) / (lit + dark + 1e-6)


def foreground_box(fg_mask: NDArray, min_size: int = SSIM_WINDOW) -> tuple[slice, slice]:
    """
    Bounding box of the mask, grown around its center to at least ``min_size``
    per side and kept inside the image
    """
    fg_mask = np.asarray(fg_mask, dtype=bool)
    if not fg_mask.any():
        raise ParameterError("Foreground mask is empty")
    slices = []
    for axis, length in enumerate(fg_mask.shape):
        hits = np.flatnonzero(fg_mask.any(axis=1 - axis))
        start, stop = int(hits[0]), int(hits[-1]) + 1
        grow = max(min(min_size, length) - (stop - start), 0)
        start = max(start - grow // 2, 0)
        stop = min(max(stop, start + min(min_size, length)), length)
        start = min(start, stop - min(min_size, length))
        slices.append(slice(start, stop))
    return slices[0], slices[1]
