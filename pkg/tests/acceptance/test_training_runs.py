"""
Long training runs. Deselected by default; run with ``pytest -m acceptance``.

The end-to-end comparison honours DREAMLIGHT_ACCEPTANCE_STEPS to shorten the
denoiser budget on slow machines.
"""

import os
import tempfile
from pathlib import Path

import numpy as np
import pytest
from django.test import SimpleTestCase

from src.apps.core.conf import load_run_config
from src.apps.evaluation.metrics import directional_consistency, psnr
from src.apps.evaluation.services import compare_reports, relight_input, run_ablation
from src.apps.fixer.services import FixerTrainer, apply_fixer, make_pairs, modulate
from src.apps.relighting.services import RelightPipeline, RelightTrainer
from src.apps.spectral.services import haar_analyze
from src.apps.synthdata.services import (
    CARDINAL_DIRECTIONS,
    render_scene,
    sample_dataset,
    sample_scene_spec,
)
from tests.factories import SceneSpecFactory


def scene_images(count, seed, size, offset=0):
    return [
        render_scene(sample_scene_spec(seed, offset + index), size, size).target
        for index in range(count)
    ]


def moving_average_drop(history, window=20):
    first = np.mean(history[:window])
    last = np.mean(history[-window:])
    return (first - last) / first


@pytest.mark.acceptance()
@pytest.mark.slow()
class TrainingSmokeTest(SimpleTestCase):

    def test_relighting_loss_halves(self):
        config = load_run_config().replace(d=8, n_q=2, T=200, lr=1e-3, batch_size=4)
        samples = [
            render_scene(sample_scene_spec(11, index), 16, 16) for index in range(16)
        ]
        trainer = RelightTrainer.from_config(config, seed=11)
        history = trainer.fit(samples, 200)
        self.assertGreaterEqual(moving_average_drop(history), 0.5)

    def test_fixer_loss_drops(self):
        config = load_run_config().replace(fixer_width=8)
        pairs = make_pairs(scene_images(32, 12, 16), seed=12)
        trainer = FixerTrainer.from_config(config, seed=12)
        history = trainer.fit(pairs, 200, batch_size=8, log_every=50)
        self.assertGreaterEqual(moving_average_drop(history), 0.3)


def box_blur(img, radius=2):
    size = 2 * radius + 1
    padded = np.pad(img, ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    height, width = img.shape[:2]
    total = sum(
        padded[dy : dy + height, dx : dx + width] for dy in range(size) for dx in range(size)
    )
    return total / size**2


@pytest.mark.acceptance()
@pytest.mark.slow()
class FixerImprovementTest(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        config = load_run_config().replace(fixer_width=16)
        cls.train = make_pairs(scene_images(500, 21, 32), seed=21)
        cls.held_out = make_pairs(scene_images(50, 21, 32, offset=500), seed=22)
        cls.trainer = FixerTrainer.from_config(config, seed=21)

        original, transformed = cls.held_out[0]
        cls.initial_coeffs, _ = modulate(
            haar_analyze(transformed).hq, haar_analyze(original).lq, cls.trainer.modulator
        )
        cls.trainer.fit(cls.train, 2000, batch_size=8, log_every=200)

    def test_modulator_starts_as_the_identity(self):
        coeffs = self.initial_coeffs
        self.assertTrue(np.all(coeffs.alpha == 1.0) and np.all(coeffs.beta == 0.0))

    def test_trained_fixer_beats_naive_recomposition(self):
        everywhere = np.ones(self.held_out[0][0].shape[:2], dtype=bool)
        margins = []
        for original, transformed in self.held_out:
            hq_in, lq_out = haar_analyze(transformed).hq, haar_analyze(original).lq
            naive = np.clip(hq_in + lq_out, 0.0, 1.0)
            fixed = apply_fixer(original, transformed, everywhere, self.trainer.modulator)
            margins.append((psnr(fixed, original), psnr(naive, original)))
        fixed_scores, naive_scores = zip(*margins)
        self.assertGreaterEqual(np.median(fixed_scores), np.median(naive_scores) + 1.0)

    def test_fixer_restores_a_blurred_foreground(self):
        scores = []
        for index, (original, transformed) in enumerate(self.held_out):
            fg_mask = render_scene(sample_scene_spec(21, 500 + index), 32, 32).fg_mask
            relit = np.where(fg_mask[:, :, None], box_blur(original), original)
            fixed = apply_fixer(relit, transformed, fg_mask, self.trainer.modulator)

            np.testing.assert_array_equal(fixed[~fg_mask], relit[~fg_mask])
            self.assertTrue(np.all((fixed >= 0.0) & (fixed <= 1.0)))
            scores.append(
                (psnr(fixed[fg_mask], original[fg_mask]), psnr(relit[fg_mask], original[fg_mask]))
            )
        fixed_scores, relit_scores = zip(*scores)
        self.assertGreater(np.median(fixed_scores), np.median(relit_scores))


@pytest.mark.acceptance()
@pytest.mark.slow()
class AdapterTrendTest(SimpleTestCase):
    """
    Full model against the variant without the light adapter, equal budget and seeds
    """

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)

    def test_adapter_improves_directional_consistency(self):
        steps = int(os.environ.get("DREAMLIGHT_ACCEPTANCE_STEPS", 20000))
        config = load_run_config().replace(
            resolution=64,
            d=32,
            n_q=4,
            T=200,
            steps=20,
            batch_size=8,
            train_steps=steps,
            log_every=500,
            use_fixer=False,
        )
        data = self.tmp / "data"
        sample_dataset(data, 800, config.seed, resolution=config.resolution)
        reports = run_ablation(
            config, data, self.tmp / "ablation", variants=["full", "no_adapter"]
        )
        full, plain = reports["full"].aggregate, reports["no_adapter"].aggregate
        self.assertGreater(full["dcs_cardinal"], plain["dcs_cardinal"])
        self.assertGreaterEqual(
            compare_reports(reports)["full_psnr_win_rate"]["no_adapter"], 0.6
        )

        checkpoint = self.tmp / "ablation" / "full" / "relight.dlkt"
        pipeline = RelightPipeline.from_checkpoint(checkpoint)
        for direction in CARDINAL_DIRECTIONS:
            sample = render_scene(SceneSpecFactory(direction=direction), 64, 64)
            output = pipeline.sample(
                relight_input(sample, "image"), config.steps, config.guidance, config.seed
            )
            score = directional_consistency(output, sample.fg_mask, sample.light_dir)
            self.assertGreater(score, 0.0, direction)
