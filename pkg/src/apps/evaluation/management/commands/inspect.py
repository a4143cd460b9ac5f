"""
Dump decay maps, condensation attention heatmaps and wavelet subbands
"""

from pathlib import Path

from src.apps.core.exceptions import ConfigurationError
from src.apps.core.imageio import load_image
from src.apps.evaluation.management.base import DreamlightCommand
from src.apps.evaluation.services import dump_attention, dump_decay_maps, dump_subbands
from src.apps.relighting.services import load_model


class Command(DreamlightCommand):
    help = "Write diagnostic PGM/PPM images"

    def add_arguments(self, parser):
        self.add_config_arguments(parser)
        parser.add_argument("--out", required=True, help="Output directory")
        parser.add_argument("--checkpoint", default=None, help="Model for attention heatmaps")
        parser.add_argument("--image", default=None, help="Background / image to analyse")

    def run(self, **options):
        config = self.run_config(options)
        out = Path(options["out"])
        side = config.resolution // 4
        written = dump_decay_maps(out, side, side)
        image = load_image(options["image"], config.resolution) if options["image"] else None
        if image is not None:
            written += dump_subbands(out, image)
        if options["checkpoint"]:
            if image is None:
                raise ConfigurationError("--image is required for attention heatmaps")
            written += dump_attention(out, load_model(options["checkpoint"]), image)
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(written)} files to {out}"))
