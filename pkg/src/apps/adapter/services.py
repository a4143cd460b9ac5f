"""
Position-guided light adapter: decay maps, light-query condensation over background
features and masked injection into foreground latent positions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

from src.apps.core.choices import DIRECTION_ORDER, Direction, MaskMode
from src.apps.core.exceptions import DimensionError, ParameterError
from src.apps.core.layers import Array

from .attention import AttentionParams, AttentionWeights


@dataclass(frozen=True)
class DecayMap:
    direction: str
    values: Array

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LightQueryBank:
    """
    Query vectors grouped by direction: shape (4, n_q, D) in left, right, top, down order
    """

    queries: Array

    def __post_init__(self) -> None:
        if self.queries.ndim != 3 or self.queries.shape[0] != len(DIRECTION_ORDER):
            raise DimensionError(
                f"Light query bank must be (4, n_q, D), got {self.queries.shape}"
            )
        if not np.all(np.isfinite(self.queries)):
            raise ParameterError("Light query bank holds non-finite entries")

    @property
    def n_q(self) -> int:
        return self.queries.shape[1]

    @property
    def dim(self) -> int:
        return self.queries.shape[2]

    def flat(self) -> Array:
        return self.queries.reshape(-1, self.dim)

    @classmethod
    def from_flat(cls, flat: Array, n_q: int) -> LightQueryBank:
        return cls(flat.reshape(len(DIRECTION_ORDER), n_q, -1))

    @classmethod
    def random(cls, n_q: int, dim: int, rng: np.random.Generator) -> LightQueryBank:
        return cls(rng.normal(0.0, 1.0 / np.sqrt(dim), (len(DIRECTION_ORDER), n_q, dim)))


def _ramp(size: int) -> Array:
    if size == 1:
        return np.ones(1)
    return 1.0 - np.arange(size) / (size - 1)


@lru_cache(maxsize=64)
def _decay_values(direction: str, height: int, width: int) -> Array:
    if direction == Direction.LEFT:
        values = np.broadcast_to(_ramp(width)[None, :], (height, width))
    elif direction == Direction.RIGHT:
        values = np.broadcast_to(_ramp(width)[None, ::-1], (height, width))
    elif direction == Direction.TOP:
        values = np.broadcast_to(_ramp(height)[:, None], (height, width))
    elif direction == Direction.DOWN:
        values = np.broadcast_to(_ramp(height)[::-1, None], (height, width))
    else:
        raise ParameterError(f"Unknown direction: {direction}")
    values = np.array(values)
    values.flags.writeable = False
    return values


def make_decay_map(direction: str, height: int, width: int) -> DecayMap:
    """
    Linear 1 -> 0 map decaying away from the named edge
    """
    if height < 1 or width < 1:
        raise DimensionError(f"Decay map needs at least 1x1, got {height}x{width}")
    return DecayMap(direction=str(direction), values=_decay_values(str(direction), height, width))


def condensation_mask(n_q: int, height: int, width: int, *, masked: bool = True) -> Array:
    """
    Multipliers for (4 * n_q queries) x (4 * n_q queries + H * W positions).

    Query-to-query entries stay 1; background entries of a direction group carry
    that direction's flattened decay map.
    """
    n_queries = len(DIRECTION_ORDER) * n_q
    mask = np.ones((n_queries, n_queries + height * width))
    if masked:
        for group, direction in enumerate(DIRECTION_ORDER):
            rows = slice(group * n_q, (group + 1) * n_q)
            mask[rows, n_queries:] = make_decay_map(direction, height, width).values.ravel()
    return mask


def position_coordinates(height: int, width: int) -> tuple[Array, Array]:
    """
    Normalized (x, y) in [0, 1] of every grid cell, row-major; a single cell sits at 0.5
    """
    xs = np.arange(width) / (width - 1) if width > 1 else np.full(1, 0.5)
    ys = np.arange(height) / (height - 1) if height > 1 else np.full(1, 0.5)
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    return grid_x.ravel(), grid_y.ravel()


def injection_mask(x: Array, y: Array, n_q: int, *, masked: bool = True) -> Array:
    """
    Multipliers for foreground positions x (4 * n_q) light queries:
    left 1 - x, right x, top 1 - y, down y
    """
    if not masked:
        return np.ones((x.size, len(DIRECTION_ORDER) * n_q))
    factors = np.stack([1.0 - x, x, 1.0 - y, y], axis=1)
    return np.repeat(factors, n_q, axis=1)


def condense_light(
    bg_feat: Array,
    bank: LightQueryBank,
    proj: AttentionParams,
    *,
    decay_maps: dict[str, Array] | None = None,
    mask_mode: str = MaskMode.POST_SOFTMAX,
    logit_bias_scale: float = 4.0,
    logit_bias: Array | None = None,
    return_weights: bool = False,
) -> LightQueryBank | tuple[LightQueryBank, AttentionWeights]:
    """
    Condense background features into the light queries with direction-biased
    masked attention; ``decay_maps`` overrides the per-direction maps.
    """
    from .layers import LightCondenser

    condenser = LightCondenser.from_params(
        proj, mask_mode=mask_mode, logit_bias_scale=logit_bias_scale
    )
    condensed = condenser.forward(
        bg_feat, bank.queries, decay_maps=decay_maps, logit_bias=logit_bias
    )
    result = LightQueryBank(condensed)
    if return_weights:
        return result, condenser.attention.last_weights
    return result


def inject_light(
    latent: Array,
    bank: LightQueryBank,
    fg_mask: NDArray,
    proj: AttentionParams,
    *,
    mask_mode: str = MaskMode.POST_SOFTMAX,
    logit_bias_scale: float = 4.0,
    return_weights: bool = False,
) -> Array | tuple[Array, AttentionWeights | None]:
    """
    Foreground latent positions attend to the light queries; background positions
    are returned unchanged.
    """
    from .layers import LightInjector

    injector = LightInjector.from_params(
        proj, n_q=bank.n_q, mask_mode=mask_mode, logit_bias_scale=logit_bias_scale
    )
    out = injector.forward(latent, bank.flat(), fg_mask)
    if return_weights:
        weights = injector.attention.last_weights if injector.has_positions else None
        return out, weights
    return out
