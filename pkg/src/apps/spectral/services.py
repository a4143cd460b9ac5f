"""
Frequency-domain primitives: 2-D Fourier transforms, the Gaussian low-pass map,
low-frequency feature enhancement and single-level Haar analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pywt

from src.apps.core.exceptions import DimensionError, ParameterError
from src.apps.core.layers import Array


@dataclass(frozen=True)
class ComplexGrid:
    """
    Spectrum of a plane (rows, cols) or of a stack of planes (rows, cols, channels).

    Zero frequency sits at index (0, 0); unnormalized forward convention.
    """

    data: np.ndarray

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class SpectralFilter:
    """
    Real coefficient map with zero frequency at the grid center
    """

    sigma: float
    map: Array

    def unshifted(self) -> Array:
        """Coefficients aligned with an fft2 spectrum (zero frequency at (0, 0))."""
        return np.fft.ifftshift(self.map)


@dataclass(frozen=True)
class EnhancementWeights:
    """
    1x1 channel mixing over stacked (real, imaginary) spectra: weight (2D, 2D), bias (2D)
    """

    weight: Array
    bias: Array

    @classmethod
    def zeros(cls, channels: int) -> EnhancementWeights:
        return cls(np.zeros((2 * channels, 2 * channels)), np.zeros(2 * channels))


@dataclass(frozen=True)
class SubbandSplit:
    """
    Additive split of an image: lq + hq reproduces the source.

    ``ll`` is the orthonormal LL coefficient plane of the (padded) image and
    ``padding`` the (rows, cols) appended before analysis.
    """

    lq: Array
    hq: Array
    ll: Array
    padding: tuple[int, int]


def _check_plane(plane: np.ndarray) -> None:
    if plane.ndim < 2 or plane.shape[0] < 1 or plane.shape[1] < 1:
        raise DimensionError(f"Plane must be at least 1x1, got shape {plane.shape}")


def fft2(plane: np.ndarray) -> ComplexGrid:
    """
    Unnormalized forward 2-D DFT over the first two axes; any size works
    """
    plane = np.asarray(plane)
    _check_plane(plane)
    return ComplexGrid(np.fft.fft2(plane, axes=(0, 1)))


def ifft2(grid: ComplexGrid) -> np.ndarray:
    """
    Inverse of fft2, scaled by 1/(rows * cols)
    """
    _check_plane(grid.data)
    return np.fft.ifft2(grid.data, axes=(0, 1))


def gaussian_lowpass_map(height: int, width: int, sigma: float) -> SpectralFilter:
    """
    exp(-(du^2 + dv^2) / (2 sigma^2)) over centered frequency offsets, in bins
    """
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if height < 1 or width < 1:
        raise DimensionError(f"Filter size must be at least 1x1, got {height}x{width}")
    du = np.arange(height) - height // 2
    dv = np.arange(width) - width // 2
    radius2 = du[:, None] ** 2 + dv[None, :] ** 2
    return SpectralFilter(sigma=float(sigma), map=np.exp(-radius2 / (2.0 * sigma**2)))


def low_freq_enhance(
    f_b: Array, spectral_filter: SpectralFilter, params: EnhancementWeights
) -> Array:
    """
    f_bl = IFFT(ReLU(Conv(FFT(f_b) * g))) + f_b on an (H, W, D) feature grid
    """
    from .layers import LowFreqEnhancer

    enhancer = LowFreqEnhancer.from_weights(params, spectral_filter.sigma)
    return enhancer.forward(f_b, spectral_filter)


def _split_padding(img: Array) -> tuple[int, int]:
    return img.shape[0] % 2, img.shape[1] % 2


def haar_analyze(img: Array) -> SubbandSplit:
    """
    Single-level orthonormal Haar split into low (LL only) and high residual parts
    """
    if img.ndim != 3 or img.shape[0] == 0 or img.shape[1] == 0:
        raise DimensionError(f"Image must be a non-empty (H, W, C) array, got {img.shape}")
    height, width = img.shape[:2]
    pad_rows, pad_cols = _split_padding(img)
    padded = np.pad(img, ((0, pad_rows), (0, pad_cols), (0, 0)), mode="symmetric")
    ll, _ = pywt.dwt2(padded, "haar", mode="periodization", axes=(0, 1))
    low = pywt.idwt2((ll, (None, None, None)), "haar", mode="periodization", axes=(0, 1))
    lq = low[:height, :width]
    return SubbandSplit(lq=lq, hq=img - lq, ll=ll, padding=(pad_rows, pad_cols))


def haar_synthesize(split: SubbandSplit) -> Array:
    return split.lq + split.hq
