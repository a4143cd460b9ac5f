"""
Cosine noise schedule
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.apps.core.exceptions import ParameterError
from src.apps.core.layers import Array

COSINE_OFFSET = 0.008
MAX_BETA = 0.999


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    alpha_bar: Array

    @classmethod
    def cosine(cls, T: int, offset: float = COSINE_OFFSET) -> NoiseSchedule:
        if T < 2:
            raise ParameterError(f"Schedule needs at least 2 steps, got {T}")

        def level(t: Array) -> Array:
            return np.cos((t / T + offset) / (1.0 + offset) * np.pi / 2.0) ** 2

        steps = np.arange(T + 1, dtype=np.float64)
        betas = np.minimum(1.0 - level(steps[1:]) / level(steps[:-1]), MAX_BETA)
        return cls(T=T, alpha_bar=np.cumprod(1.0 - betas))

    def check_step(self, t: int) -> int:
        if not 0 <= t < self.T:
            raise ParameterError(f"Step {t} outside [0, {self.T})")
        return int(t)

    def sampling_timesteps(self, steps: int) -> list[int]:
        """
        ``steps`` distinct steps from T - 1 down to 0
        """
        if not 1 <= steps <= self.T:
            raise ParameterError(f"Sampling steps must be in [1, {self.T}], got {steps}")
        if steps == 1:
            return [self.T - 1]
        return [int(t) for t in np.round(np.linspace(self.T - 1, 0, steps))]
