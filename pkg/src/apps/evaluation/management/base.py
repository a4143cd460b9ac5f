"""
Shared plumbing of the dreamlight management commands
"""

import logging

from django.core.management.base import BaseCommand, CommandError

from src.apps.core.conf import RunConfig, load_run_config
from src.apps.core.exceptions import DreamlightError

logger = logging.getLogger(__name__)

MODES = ("image", "text", "both")


class DreamlightCommand(BaseCommand):
    """
    Subclasses implement ``run``; domain errors leave with their exit code
    """

    def add_config_arguments(self, parser):
        parser.add_argument("--config", default=None, help="key=value run configuration file")
        parser.add_argument("--seed", type=int, default=None, help="Seed overriding the config")

    def add_sampling_arguments(self, parser):
        parser.add_argument("--mode", choices=MODES, default="image")
        parser.add_argument("--steps", type=int, default=None, help="Sampling steps")
        parser.add_argument("--guidance", type=float, default=None, help="Guidance scale")

    def run_config(self, options, **overrides) -> RunConfig:
        overrides.setdefault("seed", options.get("seed"))
        for key in ("steps", "guidance"):
            overrides.setdefault(key, options.get(key))
        return load_run_config(options.get("config"), overrides)

    def handle(self, *args, **options):
        try:
            self.run(**options)
        except DreamlightError as exc:
            logger.error(f"{type(exc).__name__}: {exc}")
            raise CommandError(str(exc), returncode=exc.exit_code) from exc

    def run(self, **options):
        raise NotImplementedError
