"""
Train the foreground fixer on color-transformed image pairs
"""

from django.core.management.base import CommandError

from src.apps.evaluation.management.base import DreamlightCommand
from src.apps.evaluation.services import train_fixer
from src.apps.synthdata.services import load_dataset, load_image_directory


class Command(DreamlightCommand):
    help = "Train the fixer self-supervised and write a DLKT checkpoint"

    def add_arguments(self, parser):
        self.add_config_arguments(parser)
        parser.add_argument("--dataset", default=None, help="Dataset directory (train targets)")
        parser.add_argument("--images", default=None, help="Directory of arbitrary images")
        parser.add_argument("--out", required=True, help="Checkpoint path")
        parser.add_argument("--train-steps", type=int, default=None, help="Optimizer steps")

    def run(self, **options):
        if not options["dataset"] and not options["images"]:
            raise CommandError("Give --dataset and/or --images", returncode=2)
        config = self.run_config(options, fixer_steps=options["train_steps"])
        images = []
        if options["dataset"]:
            images += [sample.target for sample in load_dataset(options["dataset"], "train")]
        if options["images"]:
            images += load_image_directory(options["images"], config.resolution)
        path, history = train_fixer(config, images, options["out"])
        self.stdout.write(
            self.style.SUCCESS(f"Trained fixer on {len(images)} images for {len(history)} steps: {path}")
        )
