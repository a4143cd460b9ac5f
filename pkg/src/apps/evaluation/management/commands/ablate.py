"""
Train and evaluate the ablation variants side by side
"""

from src.apps.evaluation.management.base import DreamlightCommand
from src.apps.evaluation.services import VARIANTS, run_ablation


class Command(DreamlightCommand):
    help = "Run the ablation harness and write per-variant reports"

    def add_arguments(self, parser):
        self.add_config_arguments(parser)
        self.add_sampling_arguments(parser)
        parser.add_argument("--dataset", required=True, help="Dataset directory")
        parser.add_argument("--out", required=True, help="Output directory")
        parser.add_argument("--variants", nargs="*", choices=list(VARIANTS), default=None)
        parser.add_argument("--split", default="test", choices=("train", "val", "test"))
        parser.add_argument("--train-steps", type=int, default=None, help="Denoiser steps")
        parser.add_argument("--timing", action="store_true", help="Record wall-clock time")

    def run(self, **options):
        config = self.run_config(options, train_steps=options["train_steps"])
        reports = run_ablation(
            config,
            options["dataset"],
            options["out"],
            variants=options["variants"],
            split=options["split"],
            mode=options["mode"],
            timing=options["timing"],
        )
        for name, report in reports.items():
            agg = report.aggregate
            dcs = "n/a" if agg["dcs"] is None else f"{agg['dcs']:.4f}"
            self.stdout.write(
                f"{name:>20}: PSNR {agg['psnr']:.3f}  SSIM {agg['ssim']:.4f}  DCS {dcs}"
            )
