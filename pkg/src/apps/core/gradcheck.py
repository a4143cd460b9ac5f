"""
Central finite-difference verification of hand-derived gradients
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from .layers import Array


def numerical_gradient(
    loss_fn: Callable[[], float],
    value: Array,
    indices: list[tuple[int, ...]],
    eps: float = 1e-6,
) -> Array:
    """
    Central differences of ``loss_fn`` with respect to selected entries of ``value``.

    ``value`` is perturbed in place and restored.
    """
    result = np.zeros(len(indices))
    for k, index in enumerate(indices):
        original = value[index]
        value[index] = original + eps
        upper = loss_fn()
        value[index] = original - eps
        lower = loss_fn()
        value[index] = original
        result[k] = (upper - lower) / (2.0 * eps)
    return result


def relative_error(analytic: Array, numeric: Array, floor: float = 1e-8) -> float:
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), floor)
    return float(np.linalg.norm(analytic - numeric)) / scale


def check_gradients(
    loss_fn: Callable[[], float],
    parameters: dict[str, tuple[Array, Array]],
    *,
    rng: np.random.Generator,
    eps: float = 1e-6,
    max_entries: int = 12,
) -> dict[str, float]:
    """
    Compare analytic gradients against central differences, block by block.

    ``parameters`` maps a block name to (value, analytic gradient). Up to
    ``max_entries`` entries per block are sampled. Returns the relative error of
    every block.
    """
    errors = {}
    for name, (value, analytic) in parameters.items():
        flat = rng.permutation(value.size)[:max_entries]
        indices = [np.unravel_index(int(i), value.shape) for i in flat]
        numeric = numerical_gradient(loss_fn, value, indices, eps=eps)
        picked = np.array([analytic[index] for index in indices])
        errors[name] = relative_error(picked, numeric)
    return errors
