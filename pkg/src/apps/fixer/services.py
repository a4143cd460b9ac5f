"""
Foreground fixer: recombine the high-frequency detail of the input foreground
with the low-frequency tone of a relit image through predicted (alpha, beta).
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from src.apps.core.checkpoint import load_checkpoint, save_checkpoint
from src.apps.core.conf import RunConfig
from src.apps.core.exceptions import DimensionError, ParameterError, StateError
from src.apps.core.layers import Array, mse_loss
from src.apps.core.optim import Adam
from src.apps.spectral.services import haar_analyze

from .layers import Modulator, PerceptualProxy

logger = logging.getLogger(__name__)

FIXER_KIND = 2.0
GAIN_RANGE = (0.5, 2.0)
GAMMA_RANGE = (0.6, 1.6)
OFFSET_RANGE = (-0.2, 0.2)
HUE_RANGE = (-np.pi / 6.0, np.pi / 6.0)

ImagePair = tuple[Array, Array]


@dataclass(frozen=True)
class ModulationField:
    alpha: Array
    beta: Array

    @classmethod
    def from_raw(cls, raw: Array) -> ModulationField:
        return cls(alpha=1.0 + raw[:, :, :3], beta=raw[:, :, 3:])


def hue_rotation(angle: float) -> Array:
    """
    Rotation of RGB vectors about the gray axis (1, 1, 1) / sqrt(3)
    """
    axis = np.ones(3) / np.sqrt(3.0)
    cross = np.array(
        [[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]]
    )
    return (
        np.cos(angle) * np.eye(3)
        + np.sin(angle) * cross
        + (1.0 - np.cos(angle)) * np.outer(axis, axis)
    )


@dataclass(frozen=True)
class ColorTransform:
    gains: tuple[float, float, float] = (1.0, 1.0, 1.0)
    gamma: float = 1.0
    offset: float = 0.0
    hue_angle: float = 0.0

    def __post_init__(self) -> None:
        checks = [
            ("gain", value, GAIN_RANGE) for value in self.gains
        ] + [
            ("gamma", self.gamma, GAMMA_RANGE),
            ("offset", self.offset, OFFSET_RANGE),
            ("hue_angle", self.hue_angle, HUE_RANGE),
        ]
        for name, value, (low, high) in checks:
            if not low <= value <= high:
                raise ParameterError(f"{name} {value} outside [{low}, {high}]")

    def apply(self, img: Array) -> Array:
        out = np.clip(img, 0.0, None) * np.asarray(self.gains)
        out = out**self.gamma + self.offset
        if self.hue_angle:
            out = out @ hue_rotation(self.hue_angle).T
        return np.clip(out, 0.0, 1.0)

    def as_dict(self) -> dict:
        return {
            "gains": list(self.gains),
            "gamma": self.gamma,
            "offset": self.offset,
            "hue_angle": self.hue_angle,
        }


def random_color_transform(
    img: Array, seed: int | Sequence[int]
) -> tuple[Array, ColorTransform]:
    rng = np.random.default_rng(seed)
    transform = ColorTransform(
        gains=tuple(float(g) for g in rng.uniform(*GAIN_RANGE, size=3)),
        gamma=float(rng.uniform(*GAMMA_RANGE)),
        offset=float(rng.uniform(*OFFSET_RANGE)),
        hue_angle=float(rng.uniform(*HUE_RANGE)),
    )
    return transform.apply(img), transform


def make_pairs(images: Sequence[Array], seed: int) -> list[ImagePair]:
    """
    (original, color-transformed) pairs, one seeded transform per image
    """
    return [
        (img, random_color_transform(img, [seed, index])[0])
        for index, img in enumerate(images)
    ]


def _recompose(
    modulator: Modulator, hq_in: Array, lq_out: Array
) -> tuple[ModulationField, Array, Array]:
    if hq_in.shape != lq_out.shape:
        raise DimensionError(f"HQ {hq_in.shape} and LQ {lq_out.shape} differ")
    coeffs = ModulationField.from_raw(modulator.forward(np.concatenate([hq_in, lq_out], axis=2)))
    hq_prime = hq_in * coeffs.alpha + coeffs.beta
    return coeffs, hq_prime, hq_prime + lq_out


def modulate(
    hq_in: Array, lq_out: Array, params: Modulator
) -> tuple[ModulationField, Array]:
    """
    HQ' = hq_in * alpha + beta and I' = HQ' + lq_out
    """
    coeffs, _, image = _recompose(params, hq_in, lq_out)
    return coeffs, image


def naive_recomposition(original: Array, transformed: Array) -> Array:
    """
    alpha = 1, beta = 0: transformed detail over original tone
    """
    return haar_analyze(transformed).hq + haar_analyze(original).lq


def new_modulator(config: RunConfig, seed: int | None = None) -> Modulator:
    return Modulator(
        config.fixer_width, np.random.default_rng(config.seed if seed is None else seed)
    )


@dataclass
class FixerTrainer:
    """
    Self-supervised training on (original, color-transformed) pairs
    """

    modulator: Modulator
    lr: float = 1e-3
    perceptual_weight: float = 0.1
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    perceptual: PerceptualProxy = field(default_factory=PerceptualProxy)
    history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.optimizer = Adam(self.lr)

    @classmethod
    def from_config(cls, config: RunConfig, *, seed: int | None = None) -> FixerTrainer:
        seed = config.seed if seed is None else seed
        return cls(
            modulator=new_modulator(config, seed),
            lr=config.fixer_lr,
            perceptual_weight=config.perceptual_weight,
            rng=np.random.default_rng([seed, 2]),
        )

    def pair_loss(self, original: Array, transformed: Array, scale: float = 1.0) -> float:
        """
        Forward and backward of one pair; gradients are scaled by ``scale``
        """
        if original.shape != transformed.shape:
            raise DimensionError(f"Pair shapes differ: {original.shape} vs {transformed.shape}")
        hq_in = haar_analyze(transformed).hq
        target = haar_analyze(original)
        _, hq_prime, image = _recompose(self.modulator, hq_in, target.lq)
        image_loss, d_image = mse_loss(image, original)
        detail_loss, d_detail = mse_loss(hq_prime, target.hq)
        loss = image_loss + detail_loss
        if self.perceptual_weight:
            perc_loss, d_perc = self.perceptual.loss(image, original)
            loss += self.perceptual_weight * perc_loss
            d_image = d_image + self.perceptual_weight * d_perc
        d_hq = (d_image + d_detail) * scale
        self.modulator.backward(np.concatenate([d_hq * hq_in, d_hq], axis=2))
        return loss

    def loss_and_grads(self, batch: Sequence[ImagePair]) -> float:
        if not batch:
            raise ParameterError("Fixer batch is empty")
        self.modulator.zero_grad()
        total = sum(self.pair_loss(o, t, 1.0 / len(batch)) for o, t in batch)
        return total / len(batch)

    def train_step(self, batch: Sequence[ImagePair]) -> float:
        loss = self.loss_and_grads(batch)
        self.optimizer.step(self.modulator.named_parameters())
        self.history.append(loss)
        return loss

    def fit(
        self,
        pairs: Sequence[ImagePair],
        steps: int,
        *,
        batch_size: int = 8,
        log_every: int = 100,
    ) -> list[float]:
        if not pairs:
            raise ParameterError("No fixer training pairs")
        size = min(batch_size, len(pairs))
        for step in range(1, steps + 1):
            picks = self.rng.choice(len(pairs), size=size, replace=False)
            loss = self.train_step([pairs[int(i)] for i in picks])
            if step % log_every == 0 or step == steps:
                logger.info(
                    f"Fixer training step {step}/{steps}: loss {loss:.5f}, "
                    f"running mean {np.mean(self.history[-log_every:]):.5f}"
                )
        return self.history


def fixer_train_step(batch: Sequence[ImagePair], trainer: FixerTrainer) -> float:
    return trainer.train_step(batch)


def apply_fixer(
    relit: Array, fg_input: Array, fg_mask: NDArray, params: Modulator | None
) -> Array:
    """
    Replace the foreground of ``relit`` by I' computed from the detail of
    ``fg_input`` and the tone of ``relit``.

    I' is clipped to [0, 1] before it is pasted under ``fg_mask``. Background
    pixels are returned unchanged.
    """
    if params is None:
        raise StateError("No trained fixer loaded")
    fg_mask = np.asarray(fg_mask, dtype=bool)
    if relit.shape != fg_input.shape or relit.shape[:2] != fg_mask.shape:
        raise DimensionError(
            f"relit {relit.shape}, fg {fg_input.shape} and mask {fg_mask.shape} differ"
        )
    if not fg_mask.any():
        return relit.copy()
    _, fixed = modulate(haar_analyze(fg_input).hq, haar_analyze(relit).lq, params)
    return np.where(fg_mask[:, :, None], np.clip(fixed, 0.0, 1.0), relit)


def save_fixer(path: Path | str, modulator: Modulator) -> Path:
    tensors = {
        **modulator.state_dict(),
        "config.kind": np.array(FIXER_KIND),
        "config.width": np.array(float(modulator.width)),
    }
    return save_checkpoint(path, tensors)


def load_fixer(path: Path | str | None) -> Modulator:
    tensors = load_checkpoint(path)
    if float(tensors.get("config.kind", -1.0)) != FIXER_KIND or "config.width" not in tensors:
        raise StateError(f"Checkpoint {path} does not hold a fixer")
    modulator = Modulator(int(tensors["config.width"]), np.random.default_rng(0))
    weights = {k: v for k, v in tensors.items() if not k.startswith("config.")}
    try:
        modulator.load_state_dict(weights)
    except DimensionError as exc:
        raise StateError(f"Fixer checkpoint {path} is inconsistent: {exc}") from exc
    logger.info(f"Loaded fixer from {path}")
    return modulator
