"""
Tests for the Lambertian scene renderer and the dataset layout
"""

import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from src.apps.core.exceptions import DatasetIOError, ParameterError, StateError
from src.apps.core.imageio import save_ppm
from src.apps.evaluation.metrics import directional_consistency
from src.apps.relighting.vocabulary import DIRECTION_WORDS, decode_prompt
from src.apps.synthdata.serializers import SampleMetadataSerializer
from src.apps.synthdata.services import (
    CARDINAL_DIRECTIONS,
    SPLITS,
    SceneSpec,
    light_direction,
    load_dataset,
    load_image_directory,
    read_metadata,
    render_scene,
    sample_dataset,
    sample_scene_spec,
    split_indices,
)
from tests.factories import BoxSceneSpecFactory, RelightSampleFactory, SceneSpecFactory


class LightDirectionTest(SimpleTestCase):

    def test_unit_vectors(self):
        for word in DIRECTION_WORDS:
            self.assertAlmostEqual(np.linalg.norm(light_direction(word, 0.3)), 1.0)

    def test_planar_orientation(self):
        assert_allclose(light_direction("left"), [-1.0, 0.0, 0.0])
        assert_allclose(light_direction("down_right"), [np.sqrt(0.5), np.sqrt(0.5), 0.0])

    def test_unknown_direction(self):
        with self.assertRaises(ParameterError):
            light_direction("north")


class SceneSpecTest(SimpleTestCase):

    def test_validation(self):
        for overrides in (
            {"object": "cone"},
            {"background_style": "stripes"},
            {"size": (0.0, 0.2)},
            {"light_dir": (1.0, 1.0, 0.0)},
            {"albedo": (1.2, 0.5, 0.5)},
            {"ambient": 0.5},
        ):
            with self.assertRaises(ParameterError):
                SceneSpecFactory(**overrides)

    def test_metadata_round_trip(self):
        spec = SceneSpecFactory()
        self.assertEqual(SceneSpec.from_metadata(spec.as_metadata()), spec)


class RenderSceneTest(SimpleTestCase):

    def test_sphere_center_pixels(self):
        spec = SceneSpecFactory()
        sample = render_scene(spec, 17, 17)
        albedo = np.array(spec.albedo)
        assert_allclose(sample.fg[8, 8], albedo * 1.2)
        lambert = 0.2 / np.sqrt(1.04)
        assert_allclose(sample.target[8, 8], albedo * lambert + albedo * 0.1)

    def test_background_and_foreground_layout(self):
        sample = RelightSampleFactory()
        outside = ~sample.fg_mask
        assert_array_equal(sample.target[outside], sample.bg[outside])
        assert_array_equal(sample.fg[outside], 0.0)
        self.assertTrue(sample.fg_mask[8, 8])
        self.assertFalse(sample.fg_mask[0, 0])
        for img in (sample.fg, sample.bg, sample.target):
            self.assertTrue(np.all((img >= 0.0) & (img <= 1.0)))

    def test_lit_side_is_brighter(self):
        sample = RelightSampleFactory(height=32)
        lum = sample.target.mean(axis=2)
        left = lum[:, :16][sample.fg_mask[:, :16]].mean()
        right = lum[:, 16:][sample.fg_mask[:, 16:]].mean()
        self.assertGreater(left, right)

    def test_box_has_bevelled_edges(self):
        spec = BoxSceneSpecFactory(direction="right")
        sample = render_scene(spec, 32, 32)
        lum = sample.target.mean(axis=2)
        row = 16
        columns = np.flatnonzero(sample.fg_mask[row])
        self.assertGreater(lum[row, columns[-1]], lum[row, 16])
        self.assertGreater(lum[row, 16], lum[row, columns[0]])

    def test_prompt_follows_the_scene(self):
        sample = RelightSampleFactory()
        self.assertEqual(decode_prompt(sample.prompt_tokens), ["left", "white", "gradient_sky"])

    def test_cardinal_targets_agree_with_their_light(self):
        for direction in CARDINAL_DIRECTIONS:
            spec = SceneSpecFactory(direction=direction)
            sample = render_scene(spec, 32, 32)
            self.assertGreater(
                directional_consistency(sample.target, sample.fg_mask, spec.light_dir), 0.0
            )


class SceneCorpusTest(SimpleTestCase):

    def test_directions_cycle(self):
        specs = [sample_scene_spec(0, index) for index in range(8)]
        self.assertEqual([spec.direction for spec in specs], list(DIRECTION_WORDS))

    def test_seeded(self):
        self.assertEqual(sample_scene_spec(4, 2), sample_scene_spec(4, 2))
        self.assertNotEqual(sample_scene_spec(4, 2), sample_scene_spec(5, 2))

    def test_split_sizes(self):
        splits = split_indices(800, 0)
        self.assertEqual([len(splits[name]) for name in SPLITS], [640, 80, 80])
        union = sorted(sum(splits.values(), []))
        self.assertEqual(union, list(range(800)))
        small = split_indices(8, 3)
        self.assertEqual([len(small[name]) for name in SPLITS], [6, 1, 1])

    def test_split_errors(self):
        with self.assertRaises(ParameterError):
            split_indices(0, 0)
        with self.assertRaises(ParameterError):
            split_indices(10, 0, (0.5, 0.5, 0.5))


class DatasetLayoutTest(SimpleTestCase):

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.root = Path(tmp.name) / "data"

    def test_generate_and_load(self):
        sizes = sample_dataset(self.root, 8, 3, resolution=16)
        self.assertEqual(sizes, {"train": 6, "val": 1, "test": 1})
        train = load_dataset(self.root, "train")
        self.assertEqual(len(train), 6)
        self.assertEqual([s.sample_id for s in train], sorted(s.sample_id for s in train))
        sample = train[0]
        self.assertEqual(sample.fg.shape, (16, 16, 3))
        self.assertEqual(sample.fg_mask.dtype, bool)
        expected = render_scene(sample_scene_spec(3, int(sample.sample_id)), 16, 16)
        assert_array_equal(sample.fg_mask, expected.fg_mask)
        assert_allclose(sample.target, expected.target, atol=0.01)

    def test_generation_is_deterministic(self):
        sample_dataset(self.root / "a", 8, 3, resolution=16)
        sample_dataset(self.root / "b", 8, 3, resolution=16)
        for split in SPLITS:
            first = (self.root / "a" / split / "metadata.jsonl").read_text()
            self.assertEqual(first, (self.root / "b" / split / "metadata.jsonl").read_text())
        for path in (self.root / "a").rglob("*.ppm"):
            twin = self.root / "b" / path.relative_to(self.root / "a")
            self.assertEqual(path.read_bytes(), twin.read_bytes())

    def test_missing_split(self):
        with self.assertRaises(StateError):
            load_dataset(self.root, "train")

    def test_corrupt_metadata(self):
        folder = self.root / "train"
        folder.mkdir(parents=True)
        (folder / "metadata.jsonl").write_text("{not json\n")
        with self.assertRaises(DatasetIOError):
            read_metadata(folder)
        (folder / "metadata.jsonl").write_text(json.dumps({"id": "00000"}) + "\n")
        with self.assertRaises(DatasetIOError):
            read_metadata(folder)

    def test_image_directory(self):
        folder = self.root / "photos"
        save_ppm(folder / "b.ppm", np.full((20, 24, 3), 0.5))
        save_ppm(folder / "a.ppm", np.zeros((16, 16, 3)))
        (folder / "notes.txt").write_text("skip")
        images = load_image_directory(folder, 8)
        self.assertEqual(len(images), 2)
        self.assertEqual(images[0].shape, (8, 8, 3))
        assert_allclose(images[0], 0.0)
        with self.assertRaises(StateError):
            load_image_directory(self.root / "absent", 8)


class SampleMetadataSerializerTest(SimpleTestCase):

    def record(self, **overrides):
        record = {
            "id": "00001",
            "light_dir": [1.0, 0.0, 0.0],
            "light_color": [1.0, 0.8, 0.55],
            "ambient": 0.2,
            "prompt_tokens": ["right", "warm", "flat"],
            "files": {"fg": "a", "bg": "b", "target": "c", "mask": "d"},
        }
        record.update(overrides)
        return record

    def test_valid_record(self):
        self.assertTrue(SampleMetadataSerializer(data=self.record()).is_valid())

    def test_invalid_records(self):
        for overrides in (
            {"light_dir": [1.0, 0.0]},
            {"ambient": 0.9},
            {"prompt_tokens": []},
            {"files": {"fg": "a"}},
        ):
            serializer = SampleMetadataSerializer(data=self.record(**overrides))
            self.assertFalse(serializer.is_valid(), overrides)
