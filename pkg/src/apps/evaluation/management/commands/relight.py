"""
Relight one foreground against a background image or a prompt
"""

import numpy as np

from src.apps.core.exceptions import ConfigurationError
from src.apps.core.imageio import load_mask, load_ppm, save_ppm
from src.apps.evaluation.management.base import DreamlightCommand
from src.apps.evaluation.services import resolve_mode
from src.apps.fixer.services import apply_fixer, load_fixer
from src.apps.relighting.services import RelightInput, RelightPipeline
from src.apps.relighting.vocabulary import encode_prompt


class Command(DreamlightCommand):
    help = "Relight a foreground and write the result as PPM"

    def add_arguments(self, parser):
        self.add_config_arguments(parser)
        self.add_sampling_arguments(parser)
        parser.add_argument("--checkpoint", default=None, help="Relighting checkpoint")
        parser.add_argument("--fixer-checkpoint", default=None, help="Fixer checkpoint")
        parser.add_argument("--fg", required=True, help="Foreground PPM")
        parser.add_argument("--mask", required=True, help="Foreground mask PGM")
        parser.add_argument("--bg", default=None, help="Background PPM (image and both modes)")
        parser.add_argument("--prompt", nargs="*", default=None, help="Prompt words (text and both modes)")
        parser.add_argument("--out", required=True, help="Output PPM")

    def build_input(self, options):
        fg = load_ppm(options["fg"])
        mask = load_mask(options["mask"])
        mode = resolve_mode(options["mode"])
        if mode != "text_based" and not options["bg"]:
            raise ConfigurationError(f"--bg is required in {options['mode']} mode")
        if mode != "image_based" and not options["prompt"]:
            raise ConfigurationError(f"--prompt is required in {options['mode']} mode")
        if mode == "image_based":
            return RelightInput.image_based(fg, mask, load_ppm(options["bg"]))
        tokens = encode_prompt(options["prompt"])
        if mode == "text_based":
            return RelightInput.text_based(fg, mask, tokens)
        return RelightInput(fg, mask, load_ppm(options["bg"]), tokens, mode)

    def run(self, **options):
        config = self.run_config(options)
        inp = self.build_input(options)
        pipeline = RelightPipeline.from_checkpoint(
            options["checkpoint"], hard_composite=config.hard_composite
        )
        output = pipeline.sample(inp, config.steps, config.guidance, config.seed, eta=config.eta)
        if config.use_fixer and options["fixer_checkpoint"]:
            output = apply_fixer(output, inp.fg, inp.fg_mask, load_fixer(options["fixer_checkpoint"]))
        save_ppm(options["out"], np.clip(output, 0.0, 1.0))
        self.stdout.write(self.style.SUCCESS(f"Relit image written to {options['out']}"))
