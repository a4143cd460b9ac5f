"""
Tests for run configuration loading and the error hierarchy
"""

import tempfile
from pathlib import Path

from django.conf import settings
from django.test import SimpleTestCase

from src.apps.core.conf import load_run_config
from src.apps.core.exceptions import (
    ConfigurationError,
    DatasetIOError,
    DimensionError,
    DreamlightError,
    ParameterError,
    StateError,
)


class RunConfigTest(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, text):
        path = Path(self.tmp.name) / "run.cfg"
        path.write_text(text)
        return path

    def test_defaults_come_from_settings(self):
        config = load_run_config()
        self.assertEqual(config.resolution, 16)
        self.assertEqual(config.mask_mode, "post_softmax")

    def test_file_then_overrides_take_precedence(self):
        path = self.write("# toy run\nseed=5\nsigma=2.5\nguidance=3\n")
        config = load_run_config(path, {"seed": 9, "steps": None})
        self.assertEqual(config.seed, 9)
        self.assertEqual(config.sigma, 2.5)
        self.assertEqual(config.guidance, 3.0)
        self.assertEqual(config.steps, 4)

    def test_boolean_keys_parse_from_text(self):
        config = load_run_config(self.write("use_adapter=false\nhard_composite=0\n"))
        self.assertFalse(config.use_adapter)
        self.assertFalse(config.hard_composite)

    def test_invalid_values_are_configuration_errors(self):
        for text in ("sigma=0\n", "resolution=20\n", "mask_mode=pre\n", "colour=red\n", "steps=50\n"):
            with self.subTest(text=text):
                with self.assertRaises(ConfigurationError):
                    load_run_config(self.write(text))

    def test_missing_file(self):
        with self.assertRaises(ConfigurationError):
            load_run_config(Path(self.tmp.name) / "absent.cfg")

    def test_replace_revalidates(self):
        config = load_run_config()
        self.assertFalse(config.replace(use_fixer=False).use_fixer)
        with self.assertRaises(ConfigurationError):
            config.replace(d=5, heads=2)

    def test_settings_override(self):
        with self.settings(DREAMLIGHT={**settings.DREAMLIGHT, "seed": 42}):
            self.assertEqual(load_run_config().seed, 42)


class ExitCodeTest(SimpleTestCase):

    def test_exit_codes(self):
        self.assertEqual(ConfigurationError.exit_code, 2)
        self.assertEqual(DimensionError.exit_code, 2)
        self.assertEqual(ParameterError.exit_code, 2)
        self.assertEqual(StateError.exit_code, 3)
        self.assertEqual(DatasetIOError.exit_code, 4)

    def test_value_errors_are_catchable_generically(self):
        self.assertTrue(issubclass(DimensionError, ValueError))
        self.assertTrue(issubclass(ParameterError, ValueError))
        self.assertTrue(issubclass(DatasetIOError, DreamlightError))
