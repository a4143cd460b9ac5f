"""
Trainable low-frequency enhancement block
"""

from __future__ import annotations

import numpy as np

from src.apps.core.exceptions import DimensionError
from src.apps.core.layers import Array, Layer

from .services import (
    ComplexGrid,
    EnhancementWeights,
    SpectralFilter,
    fft2,
    gaussian_lowpass_map,
    ifft2,
)


class LowFreqEnhancer(Layer):
    """
    Residual spectral block on an (H, W, D) feature grid.

    The spectrum is low-passed by a centered Gaussian, its real and imaginary
    parts are stacked as 2D channels and mixed by a 1x1 convolution shared over
    all frequencies, rectified, recombined and transformed back.
    """

    def __init__(
        self,
        channels: int,
        rng: np.random.Generator | None = None,
        *,
        sigma: float,
        zero_init: bool = False,
        init_scale: float = 0.02,
    ) -> None:
        super().__init__()
        self.channels = channels
        self.sigma = sigma
        width = 2 * channels
        if zero_init or rng is None:
            weight = np.zeros((width, width))
        else:
            weight = rng.normal(0.0, init_scale, size=(width, width))
        self.add_param("weight", weight)
        self.add_param("bias", np.zeros(width))
        self._filters: dict[tuple[int, int], SpectralFilter] = {}
        self._cache: tuple | None = None

    @classmethod
    def from_weights(cls, weights: EnhancementWeights, sigma: float) -> LowFreqEnhancer:
        channels = weights.weight.shape[0] // 2
        if weights.weight.shape != (2 * channels, 2 * channels):
            raise DimensionError(f"Enhancement weight must be square, got {weights.weight.shape}")
        layer = cls(channels, sigma=sigma, zero_init=True)
        layer.params["weight"][...] = weights.weight
        layer.params["bias"][...] = weights.bias
        return layer

    def filter_for(self, height: int, width: int) -> SpectralFilter:
        key = (height, width)
        if key not in self._filters:
            self._filters[key] = gaussian_lowpass_map(height, width, self.sigma)
        return self._filters[key]

    def forward(self, f_b: Array, spectral_filter: SpectralFilter | None = None) -> Array:
        if f_b.ndim != 3 or f_b.shape[2] != self.channels:
            raise DimensionError(
                f"Feature grid must be (H, W, {self.channels}), got {f_b.shape}"
            )
        height, width = f_b.shape[:2]
        if spectral_filter is None:
            spectral_filter = self.filter_for(height, width)
        if spectral_filter.map.shape != (height, width):
            raise DimensionError(
                f"Filter {spectral_filter.map.shape} does not match features {(height, width)}"
            )
        g = spectral_filter.unshifted()[:, :, None]
        spectrum = fft2(f_b).data * g
        stacked = np.concatenate([spectrum.real, spectrum.imag], axis=2)
        pre = stacked @ self.params["weight"] + self.params["bias"]
        act = np.maximum(pre, 0.0)
        c = self.channels
        mixed = ComplexGrid(act[:, :, :c] + 1j * act[:, :, c:])
        self._cache = (g, stacked, pre)
        return np.real(ifft2(mixed)) + f_b

    def backward(self, dy: Array) -> Array:
        g, stacked, pre = self._cache
        c = self.channels
        back = ifft2(ComplexGrid(dy))
        d_act = np.concatenate([back.real, -back.imag], axis=2)
        d_pre = np.where(pre > 0, d_act, 0.0)
        self.grads["weight"] += stacked.reshape(-1, 2 * c).T @ d_pre.reshape(-1, 2 * c)
        self.grads["bias"] += d_pre.sum(axis=(0, 1))
        d_stacked = d_pre @ self.params["weight"].T
        d_real = fft2(g * d_stacked[:, :, :c]).data
        d_imag = fft2(g * d_stacked[:, :, c:]).data
        return dy + d_real.real + d_imag.imag
