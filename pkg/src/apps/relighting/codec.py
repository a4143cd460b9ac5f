"""
Lossless latent codec: 4x4 space-to-depth followed by a fixed orthonormal
channel rotation.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from src.apps.core.exceptions import DimensionError
from src.apps.core.layers import Array

PATCH = 4
ROTATION_SEED = 20240917


@lru_cache(maxsize=8)
def rotation(channels: int) -> Array:
    """
    Seeded orthonormal matrix (channels, channels) with a sign-fixed QR factor
    """
    rng = np.random.default_rng(ROTATION_SEED + channels)
    q, r = np.linalg.qr(rng.normal(size=(channels, channels)))
    q = q * np.sign(np.diag(r))[None, :]
    q.flags.writeable = False
    return q


def latent_channels(image_channels: int) -> int:
    return PATCH * PATCH * image_channels


def encode_latent(img: Array) -> Array:
    if img.ndim != 3:
        raise DimensionError(f"Image must be (H, W, C), got {img.shape}")
    height, width, channels = img.shape
    if height % PATCH or width % PATCH or height == 0 or width == 0:
        raise DimensionError(f"Image sides must be multiples of {PATCH}, got {height}x{width}")
    h, w = height // PATCH, width // PATCH
    patches = img.reshape(h, PATCH, w, PATCH, channels).transpose(0, 2, 1, 3, 4)
    return patches.reshape(h, w, -1) @ rotation(PATCH * PATCH * channels)


def decode_latent(z: Array) -> Array:
    if z.ndim != 3 or z.shape[2] % (PATCH * PATCH):
        raise DimensionError(f"Latent channels must be a multiple of {PATCH * PATCH}, got {z.shape}")
    h, w, width = z.shape
    channels = width // (PATCH * PATCH)
    patches = (z @ rotation(width).T).reshape(h, w, PATCH, PATCH, channels)
    return patches.transpose(0, 2, 1, 3, 4).reshape(h * PATCH, w * PATCH, channels)
