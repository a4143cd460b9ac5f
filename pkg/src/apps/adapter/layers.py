"""
Trainable condensation and injection sites of the light adapter
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from src.apps.core.choices import DIRECTION_ORDER, MaskMode
from src.apps.core.exceptions import DimensionError
from src.apps.core.layers import Array, Layer

from .attention import AttentionParams, MaskedAttention
from .services import condensation_mask, injection_mask, position_coordinates


class LightCondenser(Layer):
    """
    Light queries attend over [queries | background features]; the background
    columns of each direction group are weighted by that group's decay map.
    Output is the residual-updated bank, shape (4, n_q, D).
    """

    def __init__(
        self,
        dim: int,
        rng: np.random.Generator | None = None,
        *,
        heads: int = 1,
        masked: bool = True,
        zero_output: bool = True,
        mask_mode: str = MaskMode.POST_SOFTMAX,
        logit_bias_scale: float = 4.0,
    ) -> None:
        super().__init__()
        self.dim = dim
        self.masked = masked
        self.attention = self.add_child(
            "attention",
            MaskedAttention(
                dim,
                dim,
                rng,
                heads=heads,
                zero_output=zero_output,
                mask_mode=mask_mode,
                logit_bias_scale=logit_bias_scale,
            ),
        )
        self._shape: tuple | None = None

    @classmethod
    def from_params(
        cls,
        params: AttentionParams,
        *,
        masked: bool = True,
        mask_mode: str = MaskMode.POST_SOFTMAX,
        logit_bias_scale: float = 4.0,
    ) -> LightCondenser:
        layer = cls(
            params.wq.shape[0],
            heads=params.heads,
            masked=masked,
            mask_mode=mask_mode,
            logit_bias_scale=logit_bias_scale,
        )
        layer.attention = layer.add_child(
            "attention",
            MaskedAttention.from_params(
                params, mask_mode=mask_mode, logit_bias_scale=logit_bias_scale
            ),
        )
        return layer

    def _mask(
        self, n_q: int, height: int, width: int, decay_maps: dict[str, Array] | None
    ) -> Array:
        mask = condensation_mask(n_q, height, width, masked=self.masked)
        if decay_maps:
            n_queries = len(DIRECTION_ORDER) * n_q
            for group, direction in enumerate(DIRECTION_ORDER):
                if direction not in decay_maps:
                    continue
                values = np.asarray(decay_maps[direction], dtype=np.float64)
                if values.shape != (height, width):
                    raise DimensionError(
                        f"Decay map for {direction} must be {(height, width)}, got {values.shape}"
                    )
                mask[group * n_q : (group + 1) * n_q, n_queries:] = values.ravel()
        return mask

    def forward(
        self,
        bg_feat: Array,
        queries: Array,
        *,
        decay_maps: dict[str, Array] | None = None,
        logit_bias: Array | None = None,
    ) -> Array:
        if bg_feat.ndim != 3 or bg_feat.shape[2] != self.dim:
            raise DimensionError(
                f"Background features must be (H, W, {self.dim}), got {bg_feat.shape}"
            )
        if queries.ndim != 3 or queries.shape[0] != len(DIRECTION_ORDER):
            raise DimensionError(f"Queries must be (4, n_q, D), got {queries.shape}")
        if queries.shape[2] != self.dim:
            raise DimensionError(
                f"Query width {queries.shape[2]} does not match features {self.dim}"
            )
        height, width = bg_feat.shape[:2]
        n_q = queries.shape[1]
        flat = queries.reshape(-1, self.dim)
        context = np.concatenate([flat, bg_feat.reshape(-1, self.dim)], axis=0)
        mask = self._mask(n_q, height, width, decay_maps)
        self._shape = (queries.shape, bg_feat.shape, flat.shape[0])
        out = flat + self.attention.forward(flat, context, mask=mask, logit_bias=logit_bias)
        return out.reshape(queries.shape)

    def backward(self, d_out: Array) -> tuple[Array, Array]:
        """
        Returns (d_bg_feat, d_queries)
        """
        query_shape, feat_shape, n_queries = self._shape
        d_flat = d_out.reshape(n_queries, self.dim)
        d_x, d_context = self.attention.backward(d_flat)
        d_queries = d_flat + d_x + d_context[:n_queries]
        d_feat = d_context[n_queries:].reshape(feat_shape)
        return d_feat, d_queries.reshape(query_shape)


class LightInjector(Layer):
    """
    Foreground latent cells attend to the flattened light-query bank with
    position-weighted direction groups; background cells pass through untouched.
    """

    def __init__(
        self,
        latent_dim: int,
        bank_dim: int,
        n_q: int,
        rng: np.random.Generator | None = None,
        *,
        heads: int = 1,
        masked: bool = True,
        zero_output: bool = True,
        mask_mode: str = MaskMode.POST_SOFTMAX,
        logit_bias_scale: float = 4.0,
    ) -> None:
        super().__init__()
        self.latent_dim = latent_dim
        self.bank_dim = bank_dim
        self.n_q = n_q
        self.masked = masked
        self.attention = self.add_child(
            "attention",
            MaskedAttention(
                latent_dim,
                bank_dim,
                rng,
                width=bank_dim,
                heads=heads,
                zero_output=zero_output,
                mask_mode=mask_mode,
                logit_bias_scale=logit_bias_scale,
            ),
        )
        self.has_positions = False
        self._cache: tuple | None = None

    @classmethod
    def from_params(
        cls,
        params: AttentionParams,
        *,
        n_q: int,
        masked: bool = True,
        mask_mode: str = MaskMode.POST_SOFTMAX,
        logit_bias_scale: float = 4.0,
    ) -> LightInjector:
        layer = cls(
            params.wq.shape[0],
            params.wk.shape[0],
            n_q,
            heads=params.heads,
            masked=masked,
            mask_mode=mask_mode,
            logit_bias_scale=logit_bias_scale,
        )
        layer.attention = layer.add_child(
            "attention",
            MaskedAttention.from_params(
                params, mask_mode=mask_mode, logit_bias_scale=logit_bias_scale
            ),
        )
        return layer

    def forward(self, latent: Array, bank: Array, fg_mask: NDArray) -> Array:
        if latent.ndim != 3 or latent.shape[2] != self.latent_dim:
            raise DimensionError(
                f"Latent must be (h, w, {self.latent_dim}), got {latent.shape}"
            )
        fg_mask = np.asarray(fg_mask, dtype=bool)
        if fg_mask.shape != latent.shape[:2]:
            raise DimensionError(
                f"Mask {fg_mask.shape} does not match latent {latent.shape[:2]}"
            )
        expected = (len(DIRECTION_ORDER) * self.n_q, self.bank_dim)
        if bank.shape != expected:
            raise DimensionError(f"Bank must be {expected}, got {bank.shape}")
        height, width = fg_mask.shape
        index = np.flatnonzero(fg_mask.ravel())
        self.has_positions = index.size > 0
        self._cache = (latent.shape, index, bank.shape)
        out = latent.copy()
        if not self.has_positions:
            return out
        xs, ys = position_coordinates(height, width)
        mask = injection_mask(xs[index], ys[index], self.n_q, masked=self.masked)
        rows = latent.reshape(-1, self.latent_dim)[index]
        flat_out = out.reshape(-1, self.latent_dim)
        flat_out[index] = rows + self.attention.forward(rows, bank, mask=mask)
        return out

    def backward(self, d_out: Array) -> tuple[Array, Array]:
        """
        Returns (d_latent, d_bank)
        """
        latent_shape, index, bank_shape = self._cache
        d_latent = d_out.copy()
        if not self.has_positions:
            return d_latent, np.zeros(bank_shape)
        d_rows = d_out.reshape(-1, self.latent_dim)[index]
        d_x, d_bank = self.attention.backward(d_rows)
        d_latent.reshape(-1, self.latent_dim)[index] += d_x
        return d_latent, d_bank
