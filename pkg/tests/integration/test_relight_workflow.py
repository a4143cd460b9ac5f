"""
End-to-end runs of the dreamlight management commands
"""

import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from src.apps.core.imageio import load_ppm
from src.apps.synthdata.services import read_metadata


@pytest.mark.integration()
class RelightWorkflowTest(SimpleTestCase):
    """
    Generate -> train -> train the fixer -> relight -> evaluate -> inspect
    """

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)
        self.data = self.tmp / "data"

    def command(self, name, *args):
        out = StringIO()
        call_command(name, *[str(a) for a in args], stdout=out)
        return out.getvalue()

    def test_complete_workflow(self):
        output = self.command("gen-data", "--out", self.data, "--n", 8, "--seed", 3)
        self.assertIn("train 6, val 1, test 1", output)

        checkpoint = self.tmp / "relight.dlkt"
        self.command("train", "--dataset", self.data, "--out", checkpoint, "--train-steps", 2)
        self.assertTrue(checkpoint.is_file())

        fixer = self.tmp / "fixer.dlkt"
        self.command("train-fixer", "--dataset", self.data, "--out", fixer, "--train-steps", 2)
        self.assertTrue(fixer.is_file())

        # relight the test sample through the file interface
        folder = self.data / "test"
        files = read_metadata(folder)[0]["files"]
        relit = self.tmp / "relit.ppm"
        self.command(
            "relight",
            "--checkpoint", checkpoint,
            "--fixer-checkpoint", fixer,
            "--fg", folder / files["fg"],
            "--mask", folder / files["mask"],
            "--bg", folder / files["bg"],
            "--out", relit,
        )
        image = load_ppm(relit)
        self.assertEqual(image.shape, (16, 16, 3))
        self.assertTrue(np.all(np.isfinite(image)))

        reports = self.tmp / "eval"
        self.command(
            "eval", "--checkpoint", checkpoint, "--fixer-checkpoint", fixer,
            "--dataset", self.data, "--out", reports, "--timing",
        )
        report = json.loads((reports / "report.json").read_text())
        self.assertEqual(report["aggregate"]["count"], 1)
        self.assertIn("wall_clock", report)
        self.assertTrue((reports / "report_summary.txt").is_file())

        dumps = self.tmp / "inspect"
        output = self.command(
            "inspect", "--out", dumps, "--checkpoint", checkpoint, "--image", folder / files["bg"]
        )
        self.assertIn("Wrote 10 files", output)

    def test_text_mode_relighting(self):
        self.command("gen-data", "--out", self.data, "--n", 8)
        checkpoint = self.tmp / "relight.dlkt"
        self.command("train", "--dataset", self.data, "--out", checkpoint, "--train-steps", 1)
        folder = self.data / "train"
        files = read_metadata(folder)[0]["files"]
        relit = self.tmp / "relit.ppm"
        self.command(
            "relight",
            "--checkpoint", checkpoint,
            "--mode", "text",
            "--prompt", "left", "warm", "flat",
            "--fg", folder / files["fg"],
            "--mask", folder / files["mask"],
            "--out", relit,
        )
        self.assertEqual(load_ppm(relit).shape, (16, 16, 3))

    def test_runs_are_byte_reproducible(self):
        self.command("gen-data", "--out", self.data, "--n", 8)
        folder = self.data / "test"
        files = read_metadata(folder)[0]["files"]
        outputs = []
        for run in ("a", "b"):
            checkpoint = self.tmp / f"{run}.dlkt"
            self.command("train", "--dataset", self.data, "--out", checkpoint, "--train-steps", 2)
            relit = self.tmp / f"{run}.ppm"
            self.command(
                "relight",
                "--checkpoint", checkpoint,
                "--fg", folder / files["fg"],
                "--mask", folder / files["mask"],
                "--bg", folder / files["bg"],
                "--out", relit,
            )
            self.command(
                "eval", "--checkpoint", checkpoint,
                "--dataset", self.data, "--out", self.tmp / f"eval_{run}",
            )
            outputs.append(
                (
                    checkpoint.read_bytes(),
                    relit.read_bytes(),
                    (self.tmp / f"eval_{run}" / "report.json").read_text(),
                )
            )
        self.assertEqual(outputs[0], outputs[1])

    def test_ablation_shares_the_denoiser(self):
        self.command("gen-data", "--out", self.data, "--n", 8)
        out = self.tmp / "ablation"
        output = self.command(
            "ablate", "--dataset", self.data, "--out", out,
            "--variants", "full", "no_fixer", "--train-steps", 1,
        )
        self.assertIn("no_fixer", output)
        self.assertEqual(sorted(p.name for p in out.glob("*/relight.dlkt")), ["relight.dlkt"])
        comparison = json.loads((out / "ablation.json").read_text())
        self.assertEqual(set(comparison["aggregate"]), {"full", "no_fixer"})


@pytest.mark.integration()
class ExitCodeTest(SimpleTestCase):

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)

    def returncode(self, name, *args):
        with self.assertRaises(CommandError) as ctx:
            call_command(name, *[str(a) for a in args], stdout=StringIO())
        return ctx.exception.returncode

    def test_missing_checkpoint_is_a_state_error(self):
        self.assertEqual(
            self.returncode("eval", "--dataset", self.tmp, "--out", self.tmp / "r"), 3
        )
        self.assertEqual(
            self.returncode(
                "eval", "--checkpoint", self.tmp / "absent.dlkt",
                "--dataset", self.tmp, "--out", self.tmp / "r",
            ),
            3,
        )

    def test_missing_dataset_is_a_state_error(self):
        self.assertEqual(
            self.returncode("train", "--dataset", self.tmp / "none", "--out", self.tmp / "m"), 3
        )

    def test_corrupt_metadata_is_an_io_error(self):
        folder = self.tmp / "data" / "train"
        folder.mkdir(parents=True)
        (folder / "metadata.jsonl").write_text("not json\n")
        self.assertEqual(
            self.returncode("train", "--dataset", self.tmp / "data", "--out", self.tmp / "m"), 4
        )

    def test_invalid_configuration(self):
        config = self.tmp / "run.conf"
        config.write_text("sigma=0\n")
        self.assertEqual(
            self.returncode("gen-data", "--out", self.tmp / "d", "--n", 8, "--config", config), 2
        )
        self.assertEqual(self.returncode("train-fixer", "--out", self.tmp / "f.dlkt"), 2)
