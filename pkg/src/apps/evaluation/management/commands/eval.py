"""
Evaluate a checkpoint on a dataset split
"""

from pathlib import Path

from src.apps.core.exceptions import StateError
from src.apps.evaluation.management.base import DreamlightCommand
from src.apps.evaluation.services import evaluate, write_report


class Command(DreamlightCommand):
    help = "Relight a dataset split and write a JSON report plus summary"

    def add_arguments(self, parser):
        self.add_config_arguments(parser)
        self.add_sampling_arguments(parser)
        parser.add_argument("--checkpoint", default=None, help="Relighting checkpoint")
        parser.add_argument("--fixer-checkpoint", default=None, help="Fixer checkpoint")
        parser.add_argument("--dataset", required=True, help="Dataset directory")
        parser.add_argument("--split", default="test", choices=("train", "val", "test"))
        parser.add_argument("--out", required=True, help="Report directory")
        parser.add_argument("--timing", action="store_true", help="Record wall-clock time")

    def run(self, **options):
        config = self.run_config(options)
        checkpoint = options["checkpoint"]
        if checkpoint is None:
            raise StateError("--checkpoint is required for evaluation")
        report = evaluate(
            Path(checkpoint),
            options["dataset"],
            config,
            split=options["split"],
            mode=options["mode"],
            fixer_checkpoint=options["fixer_checkpoint"],
            timing=options["timing"],
        )
        path = write_report(report, options["out"])
        self.stdout.write(self.style.SUCCESS(f"Report written to {path}"))
