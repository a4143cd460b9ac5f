"""
Render the synthetic paired dataset
"""

from src.apps.evaluation.management.base import DreamlightCommand
from src.apps.synthdata.services import sample_dataset


class Command(DreamlightCommand):
    help = "Render n seeded scenes into train/val/test splits"

    def add_arguments(self, parser):
        self.add_config_arguments(parser)
        parser.add_argument("--out", required=True, help="Dataset directory")
        parser.add_argument("--n", type=int, default=800, help="Number of samples")

    def run(self, **options):
        config = self.run_config(options)
        sizes = sample_dataset(
            options["out"], options["n"], config.seed, resolution=config.resolution
        )
        self.stdout.write(
            self.style.SUCCESS(
                f"Wrote {sum(sizes.values())} samples to {options['out']} "
                f"(train {sizes['train']}, val {sizes['val']}, test {sizes['test']})"
            )
        )
