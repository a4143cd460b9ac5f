"""
Analytic Lambertian scenes and the paired relighting dataset built from them.

Image frame: x to the right, y down, z toward the viewer; positions in [0, 1].
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from src.apps.core.choices import BackgroundStyle, SceneObject
from src.apps.core.exceptions import DatasetIOError, ParameterError, StateError
from src.apps.core.imageio import load_image, load_mask, load_ppm, save_pgm, save_ppm
from src.apps.core.layers import Array
from src.apps.relighting.vocabulary import COLOR_WORDS, DIRECTION_WORDS, encode_prompt

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
SPLIT_RATIO = (0.8, 0.1, 0.1)
FRONTAL_AMBIENT = 0.2
BEVEL_FRACTION = 0.3
IMAGE_SUFFIXES = (".ppm", ".pgm", ".png", ".jpg", ".jpeg", ".bmp")

PLANAR_DIRECTIONS = {
    "left": (-1.0, 0.0),
    "right": (1.0, 0.0),
    "top": (0.0, -1.0),
    "down": (0.0, 1.0),
    "top_left": (-1.0, -1.0),
    "top_right": (1.0, -1.0),
    "down_left": (-1.0, 1.0),
    "down_right": (1.0, 1.0),
}
CARDINAL_DIRECTIONS = ("left", "right", "top", "down")

PALETTE = {
    "white": (1.0, 1.0, 1.0),
    "warm": (1.0, 0.8, 0.55),
    "cool": (0.6, 0.75, 1.0),
    "red": (1.0, 0.45, 0.4),
    "green": (0.5, 1.0, 0.55),
    "purple": (0.75, 0.5, 1.0),
}

BACKGROUND_PATTERNS = {
    "gradient_sky": ((0.45, 0.6, 0.9), (0.85, 0.85, 0.8)),
    "flat": ((0.6, 0.6, 0.6), (0.6, 0.6, 0.6)),
    "two_tone": ((0.75, 0.7, 0.65), (0.35, 0.3, 0.3)),
}


def light_direction(direction: str, elevation: float = 0.0) -> Array:
    """
    Unit vector toward the light for a named image-plane direction, tilted
    toward the viewer by ``elevation``
    """
    if direction not in PLANAR_DIRECTIONS:
        raise ParameterError(f"Unknown light direction: {direction}")
    planar = np.array(PLANAR_DIRECTIONS[direction])
    vector = np.array([*(planar / np.linalg.norm(planar)), elevation])
    return vector / np.linalg.norm(vector)


@dataclass(frozen=True)
class SceneSpec:
    object: str
    center: tuple[float, float]
    size: tuple[float, float]
    albedo: tuple[float, float, float]
    light_dir: tuple[float, float, float]
    light_color: tuple[float, float, float]
    ambient: float
    background_style: str
    seed: int = 0
    direction: str = ""
    color: str = ""

    def __post_init__(self) -> None:
        if self.object not in SceneObject.values:
            raise ParameterError(f"Unknown object: {self.object}")
        if self.background_style not in BackgroundStyle.values:
            raise ParameterError(f"Unknown background style: {self.background_style}")
        if min(self.size) <= 0:
            raise ParameterError(f"Object size must be positive, got {self.size}")
        if abs(np.linalg.norm(self.light_dir) - 1.0) > 1e-6:
            raise ParameterError(f"light_dir must be a unit vector, got {self.light_dir}")
        for name in ("albedo", "light_color"):
            values = np.asarray(getattr(self, name))
            if values.shape != (3,) or values.min() < 0.0 or values.max() > 1.0:
                raise ParameterError(f"{name} must be an RGB triple in [0, 1]")
        if not 0.0 <= self.ambient <= 0.4:
            raise ParameterError(f"ambient {self.ambient} outside [0, 0.4]")

    @property
    def prompt_words(self) -> list[str]:
        return [self.direction, self.color, self.background_style]

    def as_metadata(self) -> dict[str, Any]:
        return {
            "object": self.object,
            "center": list(self.center),
            "size": list(self.size),
            "albedo": list(self.albedo),
            "light_dir": list(self.light_dir),
            "light_color": list(self.light_color),
            "ambient": self.ambient,
            "background_style": self.background_style,
            "seed": self.seed,
            "direction": self.direction,
            "color": self.color,
        }

    @classmethod
    def from_metadata(cls, record: dict[str, Any]) -> SceneSpec:
        """
        Rebuild from a metadata line; geometry defaults cover user-supplied pairs
        """
        return cls(
            object=record.get("object", SceneObject.SPHERE),
            center=tuple(record.get("center", (0.5, 0.5))),
            size=tuple(record.get("size", (0.25, 0.25))),
            albedo=tuple(record.get("albedo", (0.5, 0.5, 0.5))),
            light_dir=tuple(record["light_dir"]),
            light_color=tuple(record["light_color"]),
            ambient=float(record["ambient"]),
            background_style=record.get("background_style", BackgroundStyle.FLAT),
            seed=int(record.get("seed", 0)),
            direction=record.get("direction", ""),
            color=record.get("color", ""),
        )


@dataclass
class RelightSample:
    fg: Array
    fg_mask: NDArray[np.bool_]
    bg: Array
    target: Array
    prompt_tokens: list[int]
    light_meta: SceneSpec
    sample_id: str = ""

    @property
    def light_dir(self) -> Array:
        return np.asarray(self.light_meta.light_dir)


def _grid(height: int, width: int) -> tuple[Array, Array]:
    v, u = np.meshgrid(
        (np.arange(height) + 0.5) / height, (np.arange(width) + 0.5) / width, indexing="ij"
    )
    return u, v


def object_geometry(spec: SceneSpec, height: int, width: int) -> tuple[NDArray[np.bool_], Array]:
    """
    Coverage mask and unit normals (H, W, 3) of the scene object
    """
    u, v = _grid(height, width)
    cx, cy = spec.center
    normals = np.zeros((height, width, 3))
    if spec.object == SceneObject.SPHERE:
        radius = spec.size[0]
        dx, dy = (u - cx) / radius, (v - cy) / radius
        r2 = dx * dx + dy * dy
        mask = r2 <= 1.0
        normals[..., 0] = dx
        normals[..., 1] = dy
        normals[..., 2] = np.sqrt(np.clip(1.0 - r2, 0.0, None))
    else:
        hx, hy = spec.size
        mask = (np.abs(u - cx) <= hx) & (np.abs(v - cy) <= hy)
        bevel = BEVEL_FRACTION * min(hx, hy)
        # distances to the left, right, top and bottom edges
        edges = np.stack([u - (cx - hx), (cx + hx) - u, v - (cy - hy), (cy + hy) - v], axis=-1)
        nearest = np.argmin(edges, axis=-1)
        on_bevel = edges.min(axis=-1) < bevel
        tilted = np.array([[-1.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, -1.0, 1.0], [0.0, 1.0, 1.0]])
        tilted /= np.sqrt(2.0)
        normals[...] = (0.0, 0.0, 1.0)
        normals[on_bevel] = tilted[nearest[on_bevel]]
    normals[~mask] = 0.0
    return mask, normals


def shade(
    normals: Array, albedo: Array, light_dir: Array, light_color: Array, ambient: float
) -> Array:
    lambert = np.clip(normals @ np.asarray(light_dir), 0.0, None)[..., None]
    albedo = np.asarray(albedo)
    return albedo * np.asarray(light_color) * lambert + albedo * ambient


def render_background(spec: SceneSpec, height: int, width: int) -> Array:
    u, v = _grid(height, width)
    top, bottom = (np.array(c) for c in BACKGROUND_PATTERNS[str(spec.background_style)])
    if spec.background_style == BackgroundStyle.TWO_TONE:
        weight = (v >= 0.5).astype(np.float64)
    else:
        weight = v
    pattern = top * (1.0 - weight[..., None]) + bottom * weight[..., None]
    planar = np.asarray(spec.light_dir[:2])
    norm = np.linalg.norm(planar)
    if norm > 1e-9:
        planar = planar / norm
        ramp = np.clip(0.5 + (u - 0.5) * planar[0] + (v - 0.5) * planar[1], 0.0, 1.0)
    else:
        ramp = np.ones_like(u)
    return pattern * np.asarray(spec.light_color) * (0.35 + 0.65 * ramp)[..., None]


def render_scene(spec: SceneSpec, height: int, width: int) -> RelightSample:
    mask, normals = object_geometry(spec, height, width)
    bg = render_background(spec, height, width)
    lit = shade(normals, spec.albedo, spec.light_dir, spec.light_color, spec.ambient)
    frontal = shade(normals, spec.albedo, (0.0, 0.0, 1.0), (1.0, 1.0, 1.0), FRONTAL_AMBIENT)
    covered = mask[..., None]
    return RelightSample(
        fg=np.clip(np.where(covered, frontal, 0.0), 0.0, 1.0),
        fg_mask=mask,
        bg=np.clip(bg, 0.0, 1.0),
        target=np.clip(np.where(covered, lit, bg), 0.0, 1.0),
        prompt_tokens=encode_prompt(spec.prompt_words) if spec.direction else [],
        light_meta=spec,
    )


def sample_scene_spec(seed: int, index: int) -> SceneSpec:
    """
    Scene ``index`` of a seeded corpus; the light direction cycles through the
    eight direction buckets
    """
    rng = np.random.default_rng([seed, index])
    direction = DIRECTION_WORDS[index % len(DIRECTION_WORDS)]
    obj = SceneObject.values[int(rng.integers(len(SceneObject.values)))]
    if obj == SceneObject.SPHERE:
        radius = float(rng.uniform(0.18, 0.3))
        size = (radius, radius)
    else:
        size = (float(rng.uniform(0.15, 0.28)), float(rng.uniform(0.15, 0.28)))
    color = COLOR_WORDS[int(rng.integers(len(COLOR_WORDS)))]
    center = (float(rng.uniform(0.35, 0.65)), float(rng.uniform(0.35, 0.65)))
    albedo = tuple(float(a) for a in rng.uniform(0.3, 0.9, size=3))
    elevation = float(rng.uniform(0.0, 0.3))
    return SceneSpec(
        object=obj,
        center=center,
        size=size,
        albedo=albedo,
        light_dir=tuple(float(c) for c in light_direction(direction, elevation)),
        light_color=PALETTE[color],
        ambient=float(rng.uniform(0.0, 0.4)),
        background_style=BackgroundStyle.values[int(rng.integers(len(BackgroundStyle.values)))],
        seed=seed,
        direction=direction,
        color=color,
    )


def split_indices(n: int, seed: int, ratio: tuple[float, ...] = SPLIT_RATIO) -> dict[str, list[int]]:
    if n < 1:
        raise ParameterError(f"Dataset needs at least one sample, got {n}")
    if len(ratio) != len(SPLITS) or abs(sum(ratio) - 1.0) > 1e-9 or min(ratio) < 0:
        raise ParameterError(f"Split ratio must be three non-negative fractions summing to 1, got {ratio}")
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * ratio[0]))
    n_val = int(round(n * ratio[1]))
    n_val = min(n_val, n - n_train)
    bounds = {"train": (0, n_train), "val": (n_train, n_train + n_val), "test": (n_train + n_val, n)}
    return {split: sorted(int(i) for i in order[a:b]) for split, (a, b) in bounds.items()}


def sample_id(index: int) -> str:
    return f"{index:05d}"


def write_sample(out_dir: Path | str, split: str, index: int, seed: int, resolution: int) -> dict:
    """
    Render scene ``index`` and write its files; returns its metadata record
    """
    spec = sample_scene_spec(seed, index)
    sample = render_scene(spec, resolution, resolution)
    folder = Path(out_dir) / split
    sid = sample_id(index)
    files = {
        "fg": f"{sid}_fg.ppm",
        "bg": f"{sid}_bg.ppm",
        "target": f"{sid}_target.ppm",
        "mask": f"{sid}_mask.pgm",
    }
    save_ppm(folder / files["fg"], sample.fg)
    save_ppm(folder / files["bg"], sample.bg)
    save_ppm(folder / files["target"], sample.target)
    save_pgm(folder / files["mask"], sample.fg_mask.astype(np.float64))
    logger.debug(f"Rendered sample {sid} ({spec.object}, {spec.direction}) into {folder}")
    return {
        **spec.as_metadata(),
        "id": sid,
        "prompt_tokens": spec.prompt_words,
        "files": files,
    }


def write_metadata(folder: Path, records: list[dict]) -> Path:
    path = folder / "metadata.jsonl"
    lines = [json.dumps(record, sort_keys=True) for record in sorted(records, key=lambda r: r["id"])]
    try:
        folder.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(f"{line}\n" for line in lines))
    except OSError as exc:
        raise DatasetIOError(f"Cannot write metadata {path}: {exc}") from exc
    return path


def sample_dataset(
    out_dir: Path | str,
    n: int,
    seed: int,
    *,
    resolution: int = 64,
    split_ratio: tuple[float, ...] = SPLIT_RATIO,
) -> dict[str, int]:
    """
    Render ``n`` seeded scenes into train/val/test folders; returns split sizes
    """
    from .tasks import render_split

    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetIOError(f"Cannot create dataset directory {out_dir}: {exc}") from exc
    sizes = {}
    for split, indices in split_indices(n, seed, split_ratio).items():
        records = render_split(str(out_dir), split, indices, seed, resolution)
        write_metadata(out_dir / split, records)
        sizes[split] = len(records)
    logger.info(f"Dataset written to {out_dir}: {sizes}")
    return sizes


def read_metadata(folder: Path) -> list[dict]:
    from .serializers import SampleMetadataSerializer

    path = folder / "metadata.jsonl"
    if not path.is_file():
        raise StateError(f"Dataset split not found: {folder}")
    records = []
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DatasetIOError(f"Cannot read {path}: {exc}") from exc
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetIOError(f"{path}:{number}: invalid JSON ({exc})") from exc
        serializer = SampleMetadataSerializer(data=raw)
        if not serializer.is_valid():
            raise DatasetIOError(f"{path}:{number}: {dict(serializer.errors)}")
        records.append({**raw, **serializer.validated_data})
    return records


def load_dataset(root: Path | str, split: str) -> list[RelightSample]:
    """
    Read one split of any directory in the dataset layout
    """
    folder = Path(root) / split
    samples = []
    for record in read_metadata(folder):
        files = record["files"]
        samples.append(
            RelightSample(
                fg=load_ppm(folder / files["fg"]),
                fg_mask=load_mask(folder / files["mask"]),
                bg=load_ppm(folder / files["bg"]),
                target=load_ppm(folder / files["target"]),
                prompt_tokens=encode_prompt(list(record["prompt_tokens"])),
                light_meta=SceneSpec.from_metadata(record),
                sample_id=record["id"],
            )
        )
    logger.info(f"Loaded {len(samples)} samples from {folder}")
    return samples


def load_image_directory(root: Path | str, size: int) -> list[Array]:
    """
    Every readable image under ``root`` (sorted by name), center-cropped and resized
    """
    root = Path(root)
    if not root.is_dir():
        raise StateError(f"Image directory not found: {root}")
    paths = sorted(p for p in root.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES)
    paths = [p for p in paths if not p.name.endswith("_mask.pgm")]
    return [load_image(path, size) for path in paths]
