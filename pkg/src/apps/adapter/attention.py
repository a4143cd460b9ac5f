"""
Cross attention with optional multiplicative weight masks, forward and backward
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.apps.core.choices import MaskMode
from src.apps.core.exceptions import DimensionError
from src.apps.core.layers import Array, Layer


@dataclass(frozen=True)
class AttentionWeights:
    """
    Row-stochastic weights of one attention call, rows = queries, cols = keys
    """

    values: Array

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass
class AttentionParams:
    """
    Projections of one attention site: q/k/v into ``width``, output back to query width
    """

    wq: Array
    wk: Array
    wv: Array
    wo: Array
    bo: Array
    heads: int = 1

    @classmethod
    def initialize(
        cls,
        query_dim: int,
        context_dim: int,
        rng: np.random.Generator,
        *,
        width: int | None = None,
        heads: int = 1,
        zero_output: bool = True,
    ) -> AttentionParams:
        width = width or query_dim
        return cls(
            wq=rng.normal(0.0, 1.0 / np.sqrt(query_dim), (query_dim, width)),
            wk=rng.normal(0.0, 1.0 / np.sqrt(context_dim), (context_dim, width)),
            wv=rng.normal(0.0, 1.0 / np.sqrt(context_dim), (context_dim, width)),
            wo=(
                np.zeros((width, query_dim))
                if zero_output
                else rng.normal(0.0, 1.0 / np.sqrt(width), (width, query_dim))
            ),
            bo=np.zeros(query_dim),
            heads=heads,
        )


def softmax_rows(logits: Array) -> Array:
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


class MaskedAttention(Layer):
    """
    out = concat_h(A_h V_h) Wo + bo, where A_h is the (masked) attention of head h.

    With ``mask_mode=post_softmax`` a non-negative mask multiplies the softmax
    output and rows are renormalized. With ``logit_bias`` the logits receive
    ``logit_bias_scale * (mask - 1)`` before the softmax. The residual is left to
    the caller.
    """

    def __init__(
        self,
        query_dim: int,
        context_dim: int,
        rng: np.random.Generator | None = None,
        *,
        width: int | None = None,
        heads: int = 1,
        zero_output: bool = False,
        mask_mode: str = MaskMode.POST_SOFTMAX,
        logit_bias_scale: float = 4.0,
    ) -> None:
        super().__init__()
        width = width or query_dim
        if width % heads:
            raise DimensionError(f"Attention width {width} not divisible by {heads} heads")
        self.query_dim = query_dim
        self.context_dim = context_dim
        self.width = width
        self.heads = heads
        self.mask_mode = MaskMode(mask_mode)
        self.logit_bias_scale = logit_bias_scale
        params = AttentionParams.initialize(
            query_dim,
            context_dim,
            rng if rng is not None else np.random.default_rng(0),
            width=width,
            heads=heads,
            zero_output=zero_output,
        )
        self.load_params(params)
        self.last_weights: AttentionWeights | None = None
        self._cache: tuple | None = None

    @classmethod
    def from_params(
        cls,
        params: AttentionParams,
        *,
        mask_mode: str = MaskMode.POST_SOFTMAX,
        logit_bias_scale: float = 4.0,
    ) -> MaskedAttention:
        query_dim, width = params.wq.shape
        layer = cls(
            query_dim,
            params.wk.shape[0],
            width=width,
            heads=params.heads,
            mask_mode=mask_mode,
            logit_bias_scale=logit_bias_scale,
        )
        layer.load_params(params)
        return layer

    def load_params(self, params: AttentionParams) -> None:
        expected = {
            "wq": (self.query_dim, self.width),
            "wk": (self.context_dim, self.width),
            "wv": (self.context_dim, self.width),
            "wo": (self.width, self.query_dim),
            "bo": (self.query_dim,),
        }
        for name, shape in expected.items():
            value = np.asarray(getattr(params, name), dtype=np.float64)
            if value.shape != shape:
                raise DimensionError(f"{name}: expected {shape}, got {value.shape}")
            if name in self.params:
                self.params[name][...] = value
            else:
                self.add_param(name, value)

    def forward(
        self,
        x: Array,
        context: Array,
        mask: Array | None = None,
        logit_bias: Array | None = None,
    ) -> Array:
        if x.ndim != 2 or x.shape[1] != self.query_dim:
            raise DimensionError(f"Queries must be (N, {self.query_dim}), got {x.shape}")
        if context.ndim != 2 or context.shape[1] != self.context_dim:
            raise DimensionError(
                f"Context must be (M, {self.context_dim}), got {context.shape}"
            )
        n_keys = context.shape[0]
        for name, extra in (("mask", mask), ("logit_bias", logit_bias)):
            if extra is not None and extra.shape != (x.shape[0], n_keys):
                raise DimensionError(
                    f"{name} must be {(x.shape[0], n_keys)}, got {extra.shape}"
                )

        q = x @ self.params["wq"]
        k = context @ self.params["wk"]
        v = context @ self.params["wv"]
        head_width = self.width // self.heads
        scale = 1.0 / np.sqrt(head_width)
        heads = []
        outputs = []
        for h in range(self.heads):
            cols = slice(h * head_width, (h + 1) * head_width)
            logits = (q[:, cols] @ k[:, cols].T) * scale
            if logit_bias is not None:
                logits = logits + logit_bias
            if mask is not None and self.mask_mode == MaskMode.LOGIT_BIAS:
                logits = logits + self.logit_bias_scale * (mask - 1.0)
            probs = softmax_rows(logits)
            norm = None
            if mask is not None and self.mask_mode == MaskMode.POST_SOFTMAX:
                masked = probs * mask
                norm = masked.sum(axis=1, keepdims=True)
                norm = np.where(norm > 0, norm, 1.0)
                weights = masked / norm
            else:
                weights = probs
            heads.append((probs, norm, weights))
            outputs.append(weights @ v[:, cols])
        attended = np.concatenate(outputs, axis=1)
        self._cache = (x, context, q, k, v, attended, heads, mask, scale)
        self.last_weights = AttentionWeights(
            np.mean([weights for _, _, weights in heads], axis=0)
        )
        return attended @ self.params["wo"] + self.params["bo"]

    def backward(self, d_out: Array) -> tuple[Array, Array]:
        """
        Returns (d_x, d_context)
        """
        x, context, q, k, v, attended, heads, mask, scale = self._cache
        self.grads["wo"] += attended.T @ d_out
        self.grads["bo"] += d_out.sum(axis=0)
        d_attended = d_out @ self.params["wo"].T
        head_width = self.width // self.heads
        dq = np.zeros_like(q)
        dk = np.zeros_like(k)
        dv = np.zeros_like(v)
        for h, (probs, norm, weights) in enumerate(heads):
            cols = slice(h * head_width, (h + 1) * head_width)
            d_head = d_attended[:, cols]
            dv[:, cols] += weights.T @ d_head
            d_weights = d_head @ v[:, cols].T
            if norm is not None:
                d_masked = (
                    d_weights - np.sum(d_weights * weights, axis=1, keepdims=True)
                ) / norm
                d_probs = d_masked * mask
            else:
                d_probs = d_weights
            d_logits = probs * (d_probs - np.sum(d_probs * probs, axis=1, keepdims=True))
            dq[:, cols] += d_logits @ k[:, cols] * scale
            dk[:, cols] += d_logits.T @ q[:, cols] * scale
        self.grads["wq"] += x.T @ dq
        self.grads["wk"] += context.T @ dk
        self.grads["wv"] += context.T @ dv
        d_x = dq @ self.params["wq"].T
        d_context = dk @ self.params["wk"].T + dv @ self.params["wv"].T
        return d_x, d_context
