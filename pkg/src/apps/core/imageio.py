"""
Image files: binary PPM (P6) / PGM (P5) via Pillow.

Color images are linear in memory and sRGB-encoded on disk with the 2.2-gamma
approximation. Masks and diagnostic planes are stored linearly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from PIL import Image, UnidentifiedImageError

from .exceptions import DatasetIOError, DimensionError
from .layers import Array

GAMMA = 2.2


def linear_to_srgb_u8(img: Array) -> NDArray[np.uint8]:
    encoded = np.clip(img, 0.0, 1.0) ** (1.0 / GAMMA)
    return np.round(encoded * 255.0).astype(np.uint8)


def srgb_u8_to_linear(data: NDArray[np.uint8]) -> Array:
    return (data.astype(np.float64) / 255.0) ** GAMMA


def plane_to_u8(plane: Array) -> NDArray[np.uint8]:
    return np.round(np.clip(plane, 0.0, 1.0) * 255.0).astype(np.uint8)


def _write(path: Path, data: NDArray[np.uint8]) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(data).save(path, format="PPM")
    except OSError as exc:
        raise DatasetIOError(f"Cannot write image {path}: {exc}") from exc
    return path


def _read(path: Path) -> Image.Image:
    try:
        with Image.open(path) as image:
            image.load()
            return image
    except FileNotFoundError as exc:
        raise DatasetIOError(f"Image not found: {path}") from exc
    except (OSError, UnidentifiedImageError) as exc:
        raise DatasetIOError(f"Cannot read image {path}: {exc}") from exc


def save_ppm(path: Path | str, img: Array) -> Path:
    if img.ndim != 3 or img.shape[2] != 3:
        raise DimensionError(f"PPM needs an (H, W, 3) image, got {img.shape}")
    return _write(Path(path), linear_to_srgb_u8(img))


def save_pgm(path: Path | str, plane: Array) -> Path:
    if plane.ndim != 2:
        raise DimensionError(f"PGM needs an (H, W) plane, got {plane.shape}")
    return _write(Path(path), plane_to_u8(plane))


def load_ppm(path: Path | str) -> Array:
    image = _read(Path(path)).convert("RGB")
    return srgb_u8_to_linear(np.asarray(image))


def load_pgm(path: Path | str) -> Array:
    image = _read(Path(path)).convert("L")
    return np.asarray(image).astype(np.float64) / 255.0


def load_mask(path: Path | str) -> NDArray[np.bool_]:
    return load_pgm(path) >= 0.5


def load_image(path: Path | str, size: int) -> Array:
    """
    Read any Pillow-supported image, center-crop to square, resize to ``size``
    """
    image = _read(Path(path)).convert("RGB")
    width, height = image.size
    side = min(width, height)
    left, top = (width - side) // 2, (height - side) // 2
    image = image.crop((left, top, left + side, top + side))
    image = image.resize((size, size), Image.Resampling.BICUBIC)
    return srgb_u8_to_linear(np.asarray(image))
