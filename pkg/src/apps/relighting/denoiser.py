"""
Two-level encoder-decoder noise predictor with token cross-attention in every
block and light injection in the mid and up blocks.

Layout (h, w = latent resolution, d = model width):

    conv_in(3L -> d)
    down1  ResBlock(d, d)    + tokens                        -> skip s1   (h, w)
    downsample Conv stride 2
    down2  ResBlock(d, 2d)   + tokens                        -> skip s2   (h/2, w/2)
    mid    ResBlock(2d, 2d)  + tokens + light
    up2    ResBlock(4d, 2d)  + tokens + light   on [mid | s2]
    upsample + Conv(2d -> d)
    up1    ResBlock(2d, d)   + tokens + light   on [up | s1]              (h, w)
    SiLU, conv_out(d -> L)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from src.apps.adapter.attention import MaskedAttention
from src.apps.adapter.layers import LightCondenser, LightInjector
from src.apps.adapter.services import LightQueryBank
from src.apps.core.choices import DIRECTION_ORDER, MaskMode
from src.apps.core.exceptions import DimensionError
from src.apps.core.layers import Array, Conv2d, Dense, Layer, SiLU, Upsample2x, max_pool_mask
from src.apps.spectral.layers import LowFreqEnhancer

from .vocabulary import VOCABULARY


def sinusoidal_embedding(t: int, dim: int) -> Array:
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half, 1))
    args = t * freqs
    emb = np.concatenate([np.sin(args), np.cos(args)])
    if dim % 2:
        emb = np.concatenate([emb, np.zeros(1)])
    return emb


@dataclass
class ConditionSet:
    """
    Conditions of one denoiser call.

    ``background`` is the pixel-space background the light queries are condensed
    from; ``None`` means no light queries (text mode or nulled conditions).
    ``fg_mask`` is the pixel-resolution foreground mask.
    """

    token_ids: list[int]
    fg_mask: NDArray[np.bool_]
    background: Array | None = None
    token_embeddings: Array | None = field(default=None, repr=False)
    light_queries: LightQueryBank | None = field(default=None, repr=False)

    @property
    def has_light(self) -> bool:
        return self.background is not None


class Embedding(Layer):
    def __init__(self, count: int, dim: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.add_param("table", rng.normal(0.0, 1.0, size=(count, dim)))
        self._ids: NDArray | None = None

    def forward(self, ids: list[int]) -> Array:
        self._ids = np.asarray(ids, dtype=np.int64)
        return self.params["table"][self._ids]

    def backward(self, dy: Array) -> None:
        np.add.at(self.grads["table"], self._ids, dy)


class TimeEmbedding(Layer):
    def __init__(self, dim: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.dim = dim
        self.fc1 = self.add_child("fc1", Dense(dim, dim, rng))
        self.act1 = SiLU()
        self.fc2 = self.add_child("fc2", Dense(dim, dim, rng))
        self.act2 = SiLU()

    def forward(self, t: int) -> Array:
        h = self.act1.forward(self.fc1.forward(sinusoidal_embedding(t, self.dim)))
        return self.act2.forward(self.fc2.forward(h))

    def backward(self, dy: Array) -> None:
        self.fc1.backward(self.act1.backward(self.fc2.backward(self.act2.backward(dy))))


class ResBlock(Layer):
    """
    conv -> + time projection -> SiLU -> conv, plus a (projected) skip
    """

    def __init__(self, n_in: int, n_out: int, temb_dim: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.conv1 = self.add_child("conv1", Conv2d(n_in, n_out, rng))
        self.time_proj = self.add_child("time_proj", Dense(temb_dim, n_out, rng))
        self.act = SiLU()
        self.conv2 = self.add_child("conv2", Conv2d(n_out, n_out, rng))
        self.skip = self.add_child("skip", Dense(n_in, n_out, rng)) if n_in != n_out else None

    def forward(self, x: Array, temb: Array) -> Array:
        h = self.conv1.forward(x) + self.time_proj.forward(temb)
        h = self.conv2.forward(self.act.forward(h))
        return h + (self.skip.forward(x) if self.skip else x)

    def backward(self, dy: Array) -> tuple[Array, Array]:
        """
        Returns (d_x, d_temb)
        """
        dx = self.skip.backward(dy) if self.skip else dy.copy()
        dh = self.act.backward(self.conv2.backward(dy))
        d_temb = self.time_proj.backward(dh.sum(axis=(0, 1)))
        return dx + self.conv1.backward(dh), d_temb


class TokenCrossAttention(Layer):
    """
    Residual cross-attention from every grid cell to the prompt token embeddings
    """

    def __init__(
        self, dim: int, token_dim: int, rng: np.random.Generator, *, heads: int = 1
    ) -> None:
        super().__init__()
        self.dim = dim
        self.attention = self.add_child(
            "attention", MaskedAttention(dim, token_dim, rng, heads=heads)
        )

    def forward(self, x: Array, tokens: Array) -> Array:
        flat = x.reshape(-1, self.dim)
        return x + self.attention.forward(flat, tokens).reshape(x.shape)

    def backward(self, dy: Array) -> tuple[Array, Array]:
        d_flat, d_tokens = self.attention.backward(dy.reshape(-1, self.dim))
        return dy + d_flat.reshape(dy.shape), d_tokens


class BackgroundEncoder(Layer):
    """
    Three convolutions (stride 2, 2, 1) from pixels to latent-resolution features
    """

    def __init__(self, channels: int, dim: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.conv1 = self.add_child("conv1", Conv2d(channels, dim, rng, stride=2))
        self.act1 = SiLU()
        self.conv2 = self.add_child("conv2", Conv2d(dim, dim, rng, stride=2))
        self.act2 = SiLU()
        self.conv3 = self.add_child("conv3", Conv2d(dim, dim, rng))

    def forward(self, img: Array) -> Array:
        h = self.act1.forward(self.conv1.forward(img))
        h = self.act2.forward(self.conv2.forward(h))
        return self.conv3.forward(h)

    def backward(self, dy: Array) -> Array:
        dh = self.act2.backward(self.conv3.backward(dy))
        dh = self.act1.backward(self.conv2.backward(dh))
        return self.conv1.backward(dh)


@dataclass(frozen=True)
class DenoiserConfig:
    latent_channels: int
    d: int
    n_q: int
    heads: int
    T: int
    sigma: float
    use_adapter: bool = True
    use_spectral_filter: bool = True
    masked_adapter: bool = True
    mask_mode: str = MaskMode.POST_SOFTMAX
    logit_bias_scale: float = 4.0
    image_channels: int = 3
    vocab_size: int = len(VOCABULARY)


class Denoiser(Layer):
    def __init__(self, config: DenoiserConfig, rng: np.random.Generator) -> None:
        super().__init__()
        self.config = config
        d, heads = config.d, config.heads
        latent = config.latent_channels

        if config.use_adapter:
            self.add_param(
                "light_queries",
                LightQueryBank.random(config.n_q, d, rng).queries,
            )
            self.bg_encoder = self.add_child(
                "bg_encoder", BackgroundEncoder(config.image_channels, d, rng)
            )
            self.enhancer = (
                self.add_child("enhancer", LowFreqEnhancer(d, rng, sigma=config.sigma))
                if config.use_spectral_filter
                else None
            )
            self.condenser = self.add_child(
                "condenser",
                LightCondenser(
                    d,
                    rng,
                    heads=heads,
                    masked=config.masked_adapter,
                    mask_mode=config.mask_mode,
                    logit_bias_scale=config.logit_bias_scale,
                ),
            )

        self.tokens = self.add_child("tokens", Embedding(config.vocab_size, d, rng))
        self.time = self.add_child("time", TimeEmbedding(d, rng))
        self.conv_in = self.add_child("conv_in", Conv2d(3 * latent, d, rng))
        self.down1 = self.add_child("down1", ResBlock(d, d, d, rng))
        self.attn_down1 = self.add_child("attn_down1", TokenCrossAttention(d, d, rng, heads=heads))
        self.downsample = self.add_child("downsample", Conv2d(d, d, rng, stride=2))
        self.down2 = self.add_child("down2", ResBlock(d, 2 * d, d, rng))
        self.attn_down2 = self.add_child(
            "attn_down2", TokenCrossAttention(2 * d, d, rng, heads=heads)
        )
        self.mid = self.add_child("mid", ResBlock(2 * d, 2 * d, d, rng))
        self.attn_mid = self.add_child("attn_mid", TokenCrossAttention(2 * d, d, rng, heads=heads))
        self.up2 = self.add_child("up2", ResBlock(4 * d, 2 * d, d, rng))
        self.attn_up2 = self.add_child("attn_up2", TokenCrossAttention(2 * d, d, rng, heads=heads))
        self.upsample = Upsample2x()
        self.up_conv = self.add_child("up_conv", Conv2d(2 * d, d, rng))
        self.up1 = self.add_child("up1", ResBlock(2 * d, d, d, rng))
        self.attn_up1 = self.add_child("attn_up1", TokenCrossAttention(d, d, rng, heads=heads))
        self.out_act = SiLU()
        self.conv_out = self.add_child("conv_out", Conv2d(d, latent, rng))

        if config.use_adapter:
            injector_args = dict(
                heads=heads,
                masked=config.masked_adapter,
                mask_mode=config.mask_mode,
                logit_bias_scale=config.logit_bias_scale,
            )
            self.inject_mid = self.add_child(
                "inject_mid", LightInjector(2 * d, d, config.n_q, rng, **injector_args)
            )
            self.inject_up2 = self.add_child(
                "inject_up2", LightInjector(2 * d, d, config.n_q, rng, **injector_args)
            )
            self.inject_up1 = self.add_child(
                "inject_up1", LightInjector(d, d, config.n_q, rng, **injector_args)
            )
        self._cache: tuple | None = None

    @property
    def injectors(self) -> list[LightInjector]:
        if not self.config.use_adapter:
            return []
        return [self.inject_mid, self.inject_up2, self.inject_up1]

    def condense(self, background: Array) -> LightQueryBank:
        """
        Background image -> condensed light-query bank
        """
        features = self.bg_encoder.forward(background)
        if self.enhancer is not None:
            features = self.enhancer.forward(features)
        return LightQueryBank(self.condenser.forward(features, self.params["light_queries"]))

    def encode_conditions(self, cond: ConditionSet) -> ConditionSet:
        cond.token_embeddings = self.tokens.forward(cond.token_ids)
        cond.light_queries = (
            self.condense(cond.background)
            if cond.has_light and self.config.use_adapter
            else None
        )
        return cond

    def forward(self, z: Array, t: int, cond: ConditionSet) -> Array:
        """
        Predicted noise (h, w, L) for the assembled input ``z`` (h, w, 3L)
        """
        latent = self.config.latent_channels
        if z.ndim != 3 or z.shape[2] != 3 * latent:
            raise DimensionError(f"Denoiser input must be (h, w, {3 * latent}), got {z.shape}")
        height, width = z.shape[:2]
        if height % 2 or width % 2:
            raise DimensionError(f"Latent sides must be even, got {height}x{width}")
        if not 0 <= t < self.config.T:
            raise DimensionError(f"Step {t} outside [0, {self.config.T})")

        cond = self.encode_conditions(cond)
        tokens = cond.token_embeddings
        bank = cond.light_queries.flat() if cond.light_queries is not None else None
        mask0 = max_pool_mask(cond.fg_mask, cond.fg_mask.shape[0] // height)
        if mask0.shape != (height, width):
            raise DimensionError(f"Mask {cond.fg_mask.shape} does not match latent {height}x{width}")
        mask1 = max_pool_mask(mask0, 2)
        temb = self.time.forward(t)

        h = self.conv_in.forward(z)
        s1 = self.attn_down1.forward(self.down1.forward(h, temb), tokens)
        h = self.downsample.forward(s1)
        s2 = self.attn_down2.forward(self.down2.forward(h, temb), tokens)
        h = self.attn_mid.forward(self.mid.forward(s2, temb), tokens)
        if bank is not None:
            h = self.inject_mid.forward(h, bank, mask1)
        h = self.attn_up2.forward(self.up2.forward(np.concatenate([h, s2], axis=2), temb), tokens)
        if bank is not None:
            h = self.inject_up2.forward(h, bank, mask1)
        h = self.up_conv.forward(self.upsample.forward(h))
        h = self.attn_up1.forward(self.up1.forward(np.concatenate([h, s1], axis=2), temb), tokens)
        if bank is not None:
            h = self.inject_up1.forward(h, bank, mask0)
        self._cache = (bank is not None,)
        return self.conv_out.forward(self.out_act.forward(h))

    def backward(self, dy: Array) -> Array:
        """
        Accumulate parameter gradients of the last forward; returns d_z
        """
        (has_bank,) = self._cache
        d = self.config.d
        d_temb = np.zeros(d)
        d_tokens = 0.0
        d_bank = 0.0

        dh = self.out_act.backward(self.conv_out.backward(dy))
        if has_bank:
            dh, db = self.inject_up1.backward(dh)
            d_bank = d_bank + db
        dh, dt = self.attn_up1.backward(dh)
        d_tokens = d_tokens + dt
        d_cat, de = self.up1.backward(dh)
        d_temb += de
        dh, d_s1 = d_cat[:, :, :d], d_cat[:, :, d:]
        dh = self.upsample.backward(self.up_conv.backward(dh))

        if has_bank:
            dh, db = self.inject_up2.backward(dh)
            d_bank = d_bank + db
        dh, dt = self.attn_up2.backward(dh)
        d_tokens = d_tokens + dt
        d_cat, de = self.up2.backward(dh)
        d_temb += de
        dh, d_s2 = d_cat[:, :, : 2 * d], d_cat[:, :, 2 * d :]

        if has_bank:
            dh, db = self.inject_mid.backward(dh)
            d_bank = d_bank + db
        dh, dt = self.attn_mid.backward(dh)
        d_tokens = d_tokens + dt
        dh, de = self.mid.backward(dh)
        d_temb += de

        dh, dt = self.attn_down2.backward(dh + d_s2)
        d_tokens = d_tokens + dt
        dh, de = self.down2.backward(dh)
        d_temb += de
        dh = self.downsample.backward(dh)

        dh, dt = self.attn_down1.backward(dh + d_s1)
        d_tokens = d_tokens + dt
        dh, de = self.down1.backward(dh)
        d_temb += de
        dz = self.conv_in.backward(dh)

        self.time.backward(d_temb)
        self.tokens.backward(d_tokens)
        if has_bank:
            n_q = self.config.n_q
            d_feat, d_queries = self.condenser.backward(
                np.reshape(d_bank, (len(DIRECTION_ORDER), n_q, d))
            )
            self.grads["light_queries"] += d_queries
            if self.enhancer is not None:
                d_feat = self.enhancer.backward(d_feat)
            self.bg_encoder.backward(d_feat)
        return dz
