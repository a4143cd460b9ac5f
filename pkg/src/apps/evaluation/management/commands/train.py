"""
Train the relighting denoiser on a dataset's training split
"""

from src.apps.evaluation.management.base import DreamlightCommand
from src.apps.evaluation.services import train_relighting
from src.apps.synthdata.services import load_dataset


class Command(DreamlightCommand):
    help = "Train the relighting model and write a DLKT checkpoint"

    def add_arguments(self, parser):
        self.add_config_arguments(parser)
        parser.add_argument("--dataset", required=True, help="Dataset directory")
        parser.add_argument("--out", required=True, help="Checkpoint path")
        parser.add_argument("--train-steps", type=int, default=None, help="Optimizer steps")

    def run(self, **options):
        config = self.run_config(options, train_steps=options["train_steps"])
        samples = load_dataset(options["dataset"], "train")
        path, history = train_relighting(config, samples, options["out"])
        final = history[-1] if history else float("nan")
        self.stdout.write(
            self.style.SUCCESS(f"Trained {len(history)} steps (last loss {final:.5f}): {path}")
        )
