"""
Run configuration: settings defaults < key=value file < explicit overrides
"""

from __future__ import annotations

import dataclasses
import logging
from pathlib import Path
from typing import Any

from decouple import RepositoryEnv
from django.conf import settings

from .exceptions import ConfigurationError
from .serializers import RunConfigSerializer

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    resolution: int
    d: int
    n_q: int
    heads: int
    sigma: float
    T: int
    steps: int
    guidance: float
    eta: float
    lr: float
    seed: int
    mask_mode: str
    logit_bias_scale: float
    batch_size: int
    train_steps: int
    cond_dropout: float
    text_mode_ratio: float
    hard_composite: bool
    use_adapter: bool
    use_spectral_filter: bool
    masked_adapter: bool
    use_fixer: bool
    fixer_width: int
    fixer_lr: float
    fixer_steps: int
    perceptual_weight: float
    log_every: int

    def replace(self, **changes: Any) -> RunConfig:
        return validate_run_config({**self.as_dict(), **changes})

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


CONFIG_KEYS = frozenset(field.name for field in dataclasses.fields(RunConfig))


def read_config_file(path: Path | str) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}")
    repository = RepositoryEnv(str(path))
    values = dict(repository.data)
    unknown = sorted(set(values) - CONFIG_KEYS)
    if unknown:
        raise ConfigurationError(f"Unknown config keys in {path}: {', '.join(unknown)}")
    return values


def validate_run_config(values: dict[str, Any]) -> RunConfig:
    serializer = RunConfigSerializer(data=values)
    if not serializer.is_valid():
        raise ConfigurationError(f"Invalid configuration: {dict(serializer.errors)}")
    return RunConfig(**serializer.validated_data)


def load_run_config(
    path: Path | str | None = None, overrides: dict[str, Any] | None = None
) -> RunConfig:
    values: dict[str, Any] = dict(settings.DREAMLIGHT)
    if path is not None:
        values.update(read_config_file(path))
        logger.info(f"Loaded run configuration from {path}")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"Unknown config key: {key}")
        values[key] = value
    return validate_run_config(values)
