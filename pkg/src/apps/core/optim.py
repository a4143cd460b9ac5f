"""
Adam optimizer over named parameter arrays, updated in place
"""

from __future__ import annotations

from collections.abc import Iterable

import numpy as np

from .layers import Array


class Adam:
    def __init__(
        self,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        grad_clip: float | None = 1.0,
    ) -> None:
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.grad_clip = grad_clip
        self.step_count = 0
        self.first_moment: dict[str, Array] = {}
        self.second_moment: dict[str, Array] = {}

    def step(self, parameters: Iterable[tuple[str, Array, Array]]) -> float:
        """
        Apply one update; returns the global gradient norm before clipping
        """
        parameters = list(parameters)
        norm = float(np.sqrt(sum(float(np.sum(g * g)) for _, _, g in parameters)))
        scale = 1.0
        if self.grad_clip is not None and norm > self.grad_clip:
            scale = self.grad_clip / norm

        self.step_count += 1
        correction1 = 1.0 - self.beta1**self.step_count
        correction2 = 1.0 - self.beta2**self.step_count
        for name, value, grad in parameters:
            g = grad * scale
            m = self.first_moment.setdefault(name, np.zeros_like(value))
            v = self.second_moment.setdefault(name, np.zeros_like(value))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            value -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
        return norm
