"""
Tests for PSNR, SSIM and the directional consistency score
"""

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from src.apps.core.exceptions import DimensionError, ParameterError
from src.apps.evaluation.metrics import (
    PSNR_CAP,
    SSIM_C1,
    SSIM_C2,
    capped,
    directional_consistency,
    foreground_box,
    psnr,
    ssim,
)
from src.apps.synthdata.services import light_direction, render_scene
from tests.factories import SceneSpecFactory, disc_mask


def loop_ssim(a, b, window=7):
    values = []
    for c in range(a.shape[2]):
        for i in range(a.shape[0] - window + 1):
            for j in range(a.shape[1] - window + 1):
                x = a[i : i + window, j : j + window, c].ravel()
                y = b[i : i + window, j : j + window, c].ravel()
                mx, my = x.mean(), y.mean()
                vx, vy = x.var(), y.var()
                cov = np.mean((x - mx) * (y - my))
                values.append(
                    (2 * mx * my + SSIM_C1)
                    * (2 * cov + SSIM_C2)
                    / ((mx**2 + my**2 + SSIM_C1) * (vx + vy + SSIM_C2))
                )
    return float(np.mean(values))


class PsnrTest(SimpleTestCase):

    def test_known_values(self):
        a = np.zeros((4, 4, 3))
        self.assertAlmostEqual(psnr(a, a + 0.1), 20.0)
        self.assertEqual(psnr(a, a), float("inf"))
        self.assertEqual(capped(psnr(a, a)), PSNR_CAP)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            psnr(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


class SsimTest(SimpleTestCase):

    def test_identical_images(self):
        img = np.random.default_rng(0).uniform(size=(12, 12, 3))
        self.assertAlmostEqual(ssim(img, img), 1.0)

    def test_constant_images(self):
        self.assertAlmostEqual(
            ssim(np.zeros((8, 8, 3)), np.ones((8, 8, 3))), SSIM_C1 / (1.0 + SSIM_C1)
        )

    def test_matches_window_loop(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(size=(9, 10, 3))
        b = np.clip(a + rng.normal(0.0, 0.1, a.shape), 0.0, 1.0)
        assert_allclose(ssim(a, b), loop_ssim(a, b), rtol=1e-10)

    def test_grayscale_and_small_images(self):
        plane = np.random.default_rng(2).uniform(size=(7, 7))
        self.assertAlmostEqual(ssim(plane, plane), 1.0)
        with self.assertRaises(ParameterError):
            ssim(np.zeros((6, 8, 3)), np.zeros((6, 8, 3)))


class DirectionalConsistencyTest(SimpleTestCase):

    def test_sign_follows_the_light(self):
        sample = render_scene(SceneSpecFactory(direction="left"), 32, 32)
        toward = directional_consistency(sample.target, sample.fg_mask, light_direction("left"))
        away = directional_consistency(sample.target, sample.fg_mask, light_direction("right"))
        self.assertGreater(toward, 0.0)
        self.assertAlmostEqual(away, -toward, places=6)

    def test_uniform_foreground_scores_zero(self):
        img = np.full((16, 16, 3), 0.4)
        score = directional_consistency(img, disc_mask(16, 16), light_direction("top"))
        self.assertAlmostEqual(score, 0.0)

    def test_errors(self):
        img = np.zeros((8, 8, 3))
        with self.assertRaises(ParameterError):
            directional_consistency(img, np.zeros((8, 8), bool), light_direction("left"))
        with self.assertRaises(ParameterError):
            directional_consistency(img, np.ones((8, 8), bool), (0.0, 0.0, 1.0))
        with self.assertRaises(DimensionError):
            directional_consistency(img, np.ones((4, 8), bool), light_direction("left"))


class ForegroundBoxTest(SimpleTestCase):

    def test_tight_box(self):
        mask = disc_mask(32, 32, radius=0.4)
        rows, cols = foreground_box(mask)
        self.assertTrue(mask[rows, cols].sum() == mask.sum())
        self.assertGreaterEqual(rows.stop - rows.start, 7)

    def test_small_mask_grows_inside_the_image(self):
        mask = np.zeros((16, 16), dtype=bool)
        mask[0, 15] = True
        rows, cols = foreground_box(mask)
        self.assertEqual((rows.start, rows.stop), (0, 7))
        self.assertEqual((cols.start, cols.stop), (9, 16))

    def test_empty_mask(self):
        with self.assertRaises(ParameterError):
            foreground_box(np.zeros((8, 8), dtype=bool))
