"""
Relighting pipeline: input assembly, epsilon-prediction training and guided
DDIM sampling around the denoiser.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
from numpy.typing import NDArray

from src.apps.core.checkpoint import load_checkpoint, save_checkpoint
from src.apps.core.choices import MaskMode, RelightMode
from src.apps.core.conf import RunConfig
from src.apps.core.exceptions import DimensionError, ParameterError, StateError
from src.apps.core.layers import Array, mse_loss
from src.apps.core.optim import Adam

from .codec import decode_latent, encode_latent, latent_channels
from .denoiser import ConditionSet, Denoiser, DenoiserConfig
from .schedule import NoiseSchedule
from .vocabulary import BLEND_ID, NULL_ID

if TYPE_CHECKING:
    from src.apps.synthdata.services import RelightSample

logger = logging.getLogger(__name__)

CONFIG_PREFIX = "config."
DENOISER_KIND = 1.0


@dataclass
class RelightInput:
    fg: Array
    fg_mask: NDArray[np.bool_]
    bg: Array
    prompt_tokens: list[int]
    mode: str = RelightMode.IMAGE_BASED

    def __post_init__(self) -> None:
        self.mode = RelightMode(self.mode)
        self.fg_mask = np.asarray(self.fg_mask, dtype=bool)
        if self.fg.shape != self.bg.shape or self.fg.shape[:2] != self.fg_mask.shape:
            raise DimensionError(
                f"fg {self.fg.shape}, bg {self.bg.shape} and mask {self.fg_mask.shape} differ"
            )
        if self.mode == RelightMode.IMAGE_BASED and list(self.prompt_tokens) != [BLEND_ID]:
            raise ParameterError("Image-based relighting uses the BLEND prompt only")
        if self.mode == RelightMode.TEXT_BASED and np.any(self.bg):
            raise ParameterError("Text-based relighting needs an all-black background")
        if not self.prompt_tokens:
            raise ParameterError("Prompt needs at least one token")

    @classmethod
    def image_based(cls, fg: Array, fg_mask: NDArray, bg: Array) -> RelightInput:
        return cls(fg, fg_mask, bg, [BLEND_ID], RelightMode.IMAGE_BASED)

    @classmethod
    def text_based(cls, fg: Array, fg_mask: NDArray, prompt_tokens: list[int]) -> RelightInput:
        return cls(fg, fg_mask, np.zeros_like(fg), list(prompt_tokens), RelightMode.TEXT_BASED)

    @property
    def has_background(self) -> bool:
        return self.mode != RelightMode.TEXT_BASED


def masked_foreground(fg: Array, fg_mask: NDArray) -> Array:
    return fg * np.asarray(fg_mask, dtype=np.float64)[:, :, None]


def assemble_input(inp: RelightInput, noise: Array, *, null_background: bool = False) -> Array:
    """
    Channel-wise [noise | encode(masked fg) | encode(bg)]; a nulled or text-mode
    background contributes the encoded black image
    """
    fg_latent = encode_latent(masked_foreground(inp.fg, inp.fg_mask))
    if noise.shape != fg_latent.shape:
        raise DimensionError(f"Noise {noise.shape} does not match latent {fg_latent.shape}")
    bg = inp.bg if inp.has_background and not null_background else np.zeros_like(inp.bg)
    return np.concatenate([noise, fg_latent, encode_latent(bg)], axis=2)


def conditions_for(inp: RelightInput, *, null: bool = False) -> ConditionSet:
    if null:
        return ConditionSet(token_ids=[NULL_ID], fg_mask=inp.fg_mask)
    return ConditionSet(
        token_ids=list(inp.prompt_tokens),
        fg_mask=inp.fg_mask,
        background=inp.bg if inp.has_background else None,
    )


def corrupt(schedule: NoiseSchedule, z0: Array, t: int, eps: Array) -> Array:
    alpha_bar = schedule.alpha_bar[schedule.check_step(t)]
    return np.sqrt(alpha_bar) * z0 + np.sqrt(1.0 - alpha_bar) * eps


def epsilon_loss(pred: Array, eps: Array) -> tuple[float, Array]:
    return mse_loss(pred, eps)


def denoiser_config(config: RunConfig, image_channels: int = 3) -> DenoiserConfig:
    return DenoiserConfig(
        latent_channels=latent_channels(image_channels),
        d=config.d,
        n_q=config.n_q,
        heads=config.heads,
        T=config.T,
        sigma=config.sigma,
        use_adapter=config.use_adapter,
        use_spectral_filter=config.use_spectral_filter,
        masked_adapter=config.masked_adapter,
        mask_mode=config.mask_mode,
        logit_bias_scale=config.logit_bias_scale,
        image_channels=image_channels,
    )


def _encode_config(config: DenoiserConfig) -> dict[str, Array]:
    values: dict[str, Any] = {
        "kind": DENOISER_KIND,
        "latent_channels": config.latent_channels,
        "d": config.d,
        "n_q": config.n_q,
        "heads": config.heads,
        "T": config.T,
        "sigma": config.sigma,
        "use_adapter": config.use_adapter,
        "use_spectral_filter": config.use_spectral_filter,
        "masked_adapter": config.masked_adapter,
        "mask_mode": MaskMode.values.index(config.mask_mode),
        "logit_bias_scale": config.logit_bias_scale,
        "image_channels": config.image_channels,
        "vocab_size": config.vocab_size,
    }
    return {f"{CONFIG_PREFIX}{key}": np.array(float(value)) for key, value in values.items()}


def _decode_config(tensors: dict[str, Array]) -> DenoiserConfig:
    try:
        raw = {
            key[len(CONFIG_PREFIX) :]: float(value)
            for key, value in tensors.items()
            if key.startswith(CONFIG_PREFIX)
        }
        if raw.pop("kind") != DENOISER_KIND:
            raise StateError("Checkpoint does not hold a relighting model")
        return DenoiserConfig(
            latent_channels=int(raw["latent_channels"]),
            d=int(raw["d"]),
            n_q=int(raw["n_q"]),
            heads=int(raw["heads"]),
            T=int(raw["T"]),
            sigma=raw["sigma"],
            use_adapter=bool(raw["use_adapter"]),
            use_spectral_filter=bool(raw["use_spectral_filter"]),
            masked_adapter=bool(raw["masked_adapter"]),
            mask_mode=MaskMode.values[int(raw["mask_mode"])],
            logit_bias_scale=raw["logit_bias_scale"],
            image_channels=int(raw["image_channels"]),
            vocab_size=int(raw["vocab_size"]),
        )
    except KeyError as exc:
        raise StateError(f"Checkpoint lacks configuration entry {exc}") from exc


def save_model(path: Path | str, model: Denoiser) -> Path:
    return save_checkpoint(path, {**model.state_dict(), **_encode_config(model.config)})


def load_model(path: Path | str | None) -> Denoiser:
    tensors = load_checkpoint(path)
    model = Denoiser(_decode_config(tensors), np.random.default_rng(0))
    weights = {k: v for k, v in tensors.items() if not k.startswith(CONFIG_PREFIX)}
    try:
        model.load_state_dict(weights)
    except DimensionError as exc:
        raise StateError(f"Checkpoint {path} does not match its configuration: {exc}") from exc
    logger.info(f"Loaded relighting model from {path} ({model.parameter_count()} parameters)")
    return model


@dataclass(frozen=True)
class TrainingDraw:
    """
    Random choices of one training example
    """

    t: int
    eps: Array
    drop: bool
    text_mode: bool


def training_input(sample: RelightSample, draw: TrainingDraw) -> RelightInput:
    if draw.text_mode:
        return RelightInput.text_based(sample.fg, sample.fg_mask, sample.prompt_tokens)
    return RelightInput.image_based(sample.fg, sample.fg_mask, sample.bg)


@dataclass
class RelightTrainer:
    """
    Epsilon-prediction training with condition dropout and Adam updates
    """

    model: Denoiser
    config: RunConfig
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    schedule: NoiseSchedule = field(init=False)
    optimizer: Adam = field(init=False)
    history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.schedule = NoiseSchedule.cosine(self.config.T)
        self.optimizer = Adam(self.config.lr)

    @classmethod
    def from_config(cls, config: RunConfig, *, seed: int | None = None) -> RelightTrainer:
        seed = config.seed if seed is None else seed
        model = Denoiser(denoiser_config(config), np.random.default_rng(seed))
        return cls(model=model, config=config, rng=np.random.default_rng([seed, 1]))

    def draw(self, sample: RelightSample) -> TrainingDraw:
        latent_shape = (
            sample.target.shape[0] // 4,
            sample.target.shape[1] // 4,
            self.model.config.latent_channels,
        )
        return TrainingDraw(
            t=int(self.rng.integers(self.schedule.T)),
            eps=self.rng.normal(size=latent_shape),
            drop=bool(self.rng.random() < self.config.cond_dropout),
            text_mode=bool(self.rng.random() < self.config.text_mode_ratio),
        )

    def example_loss(self, sample: RelightSample, draw: TrainingDraw) -> tuple[float, Array]:
        """
        Forward one example; returns (loss, d_loss/d_prediction)
        """
        inp = training_input(sample, draw)
        zt = corrupt(self.schedule, encode_latent(sample.target), draw.t, draw.eps)
        z_in = assemble_input(inp, zt, null_background=draw.drop)
        pred = self.model.forward(z_in, draw.t, conditions_for(inp, null=draw.drop))
        return epsilon_loss(pred, draw.eps)

    def loss_and_grads(
        self, batch: Sequence[RelightSample], draws: Sequence[TrainingDraw]
    ) -> float:
        """
        Mean batch loss; gradients of that mean are left in the model
        """
        if not batch:
            raise ParameterError("Training batch is empty")
        self.model.zero_grad()
        total = 0.0
        for sample, draw in zip(batch, draws):
            loss, grad = self.example_loss(sample, draw)
            self.model.backward(grad / len(batch))
            total += loss
        return total / len(batch)

    def train_step(self, batch: Sequence[RelightSample]) -> float:
        if not batch:
            raise ParameterError("Training batch is empty")
        loss = self.loss_and_grads(batch, [self.draw(sample) for sample in batch])
        self.optimizer.step(self.model.named_parameters())
        self.history.append(loss)
        return loss

    def fit(self, samples: Sequence[RelightSample], steps: int | None = None) -> list[float]:
        if not samples:
            raise ParameterError("No training samples")
        steps = self.config.train_steps if steps is None else steps
        size = min(self.config.batch_size, len(samples))
        for step in range(1, steps + 1):
            picks = self.rng.choice(len(samples), size=size, replace=False)
            loss = self.train_step([samples[int(i)] for i in picks])
            if step % self.config.log_every == 0 or step == steps:
                recent = self.history[-self.config.log_every :]
                logger.info(
                    f"Relight training step {step}/{steps}: loss {loss:.5f}, "
                    f"running mean {np.mean(recent):.5f}"
                )
        return self.history


def train_step(batch: Sequence[RelightSample], trainer: RelightTrainer) -> float:
    return trainer.train_step(batch)


@dataclass
class RelightPipeline:
    model: Denoiser
    hard_composite: bool = True

    def __post_init__(self) -> None:
        self.schedule = NoiseSchedule.cosine(self.model.config.T)

    @classmethod
    def from_checkpoint(
        cls, path: Path | str | None, *, hard_composite: bool = True
    ) -> RelightPipeline:
        return cls(model=load_model(path), hard_composite=hard_composite)

    def save(self, path: Path | str) -> Path:
        return save_model(path, self.model)

    def predict_noise(self, inp: RelightInput, z: Array, t: int, guidance: float) -> Array:
        cond = self.model.forward(assemble_input(inp, z), t, conditions_for(inp))
        if guidance == 1.0:
            return cond
        uncond = self.model.forward(
            assemble_input(inp, z, null_background=True), t, conditions_for(inp, null=True)
        )
        return uncond + guidance * (cond - uncond)

    def sample(
        self,
        inp: RelightInput,
        steps: int,
        guidance: float,
        seed: int,
        *,
        eta: float = 0.0,
    ) -> Array:
        """
        Deterministic DDIM loop from seeded noise; the predicted clean latent is
        clipped to the image range at every step
        """
        if inp.fg.shape[0] % 8 or inp.fg.shape[1] % 8:
            raise DimensionError(f"Image sides must be multiples of 8, got {inp.fg.shape[:2]}")
        rng = np.random.default_rng(seed)
        h, w = inp.fg.shape[0] // 4, inp.fg.shape[1] // 4
        z = rng.normal(size=(h, w, self.model.config.latent_channels))
        timesteps = self.schedule.sampling_timesteps(steps)
        alpha_bar = self.schedule.alpha_bar
        for index, t in enumerate(timesteps):
            ab_t = alpha_bar[t]
            ab_prev = alpha_bar[timesteps[index + 1]] if index + 1 < len(timesteps) else 1.0
            eps = self.predict_noise(inp, z, t, guidance)
            x0 = (z - np.sqrt(1.0 - ab_t) * eps) / np.sqrt(ab_t)
            x0 = encode_latent(np.clip(decode_latent(x0), 0.0, 1.0))
            eps = (z - np.sqrt(ab_t) * x0) / np.sqrt(1.0 - ab_t)
            sigma = eta * np.sqrt((1.0 - ab_prev) / (1.0 - ab_t) * (1.0 - ab_t / ab_prev))
            z = np.sqrt(ab_prev) * x0 + np.sqrt(max(1.0 - ab_prev - sigma**2, 0.0)) * eps
            if sigma > 0:
                z = z + sigma * rng.normal(size=z.shape)
            logger.debug(f"DDIM step {index + 1}/{len(timesteps)} at t={t}")
        image = np.clip(decode_latent(z), 0.0, 1.0)
        if self.hard_composite and inp.has_background:
            image = np.where(inp.fg_mask[:, :, None], image, inp.bg)
        return image


def sample(
    pipeline: RelightPipeline | None,
    inp: RelightInput,
    steps: int,
    guidance: float,
    seed: int,
    *,
    eta: float = 0.0,
) -> Array:
    if pipeline is None:
        raise StateError("No trained relighting model loaded")
    return pipeline.sample(inp, steps, guidance, seed, eta=eta)
