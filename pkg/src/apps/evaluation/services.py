"""
Evaluation, ablation and diagnostic dumps
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from src.apps.adapter.services import make_decay_map
from src.apps.core.choices import DIRECTION_ORDER, RelightMode
from src.apps.core.conf import RunConfig
from src.apps.core.exceptions import DatasetIOError, ParameterError, StateError
from src.apps.core.imageio import save_pgm, save_ppm
from src.apps.core.layers import Array
from src.apps.fixer.layers import Modulator
from src.apps.fixer.services import FixerTrainer, apply_fixer, make_pairs, save_fixer
from src.apps.relighting.denoiser import Denoiser
from src.apps.relighting.services import RelightInput, RelightPipeline, RelightTrainer
from src.apps.spectral.services import haar_analyze
from src.apps.synthdata.services import CARDINAL_DIRECTIONS, RelightSample, load_dataset

from .metrics import (
    PSNR_CAP,
    SSIM_C1,
    SSIM_C2,
    SSIM_WINDOW,
    capped,
    directional_consistency,
    foreground_box,
    psnr,
    ssim,
)

logger = logging.getLogger(__name__)

VARIANTS: dict[str, dict[str, bool]] = {
    "full": {},
    "no_adapter": {"use_adapter": False},
    "no_spectral_filter": {"use_spectral_filter": False},
    "unmasked_adapter": {"masked_adapter": False},
    "no_fixer": {"use_fixer": False},
}
MODE_ALIASES = {
    "image": RelightMode.IMAGE_BASED,
    "text": RelightMode.TEXT_BASED,
    "both": RelightMode.BOTH,
}
METRIC_NOTES = {
    "psnr": f"10*log10(1/MSE) in dB on [0, 1] images, capped at {PSNR_CAP:g}",
    "ssim": (
        f"uniform {SSIM_WINDOW}x{SSIM_WINDOW} window over valid positions, "
        f"C1={SSIM_C1:g}, C2={SSIM_C2:g}, mean over windows and channels"
    ),
    "dcs": "directional consistency score: a proxy metric of this project, not a published benchmark",
    "fg": "psnr_fg / ssim_fg are computed on the foreground bounding box (at least 7x7)",
}


@dataclass
class EvalReport:
    variant: str
    split: str
    seed: int
    mode: str
    steps: int
    guidance: float
    config: dict[str, Any]
    samples: list[dict[str, Any]]
    aggregate: dict[str, Any] = field(default_factory=dict)
    metrics: dict[str, str] = field(default_factory=lambda: dict(METRIC_NOTES))
    wall_clock: float | None = None

    def __post_init__(self) -> None:
        if not self.aggregate:
            self.aggregate = aggregate_scores(self.samples)

    def as_dict(self) -> dict[str, Any]:
        from .serializers import EvalReportSerializer

        return EvalReportSerializer(self).data


def resolve_mode(mode: str) -> str:
    if mode in MODE_ALIASES:
        return MODE_ALIASES[mode]
    if mode in RelightMode.values:
        return RelightMode(mode)
    raise ParameterError(f"Unknown relighting mode: {mode}")


def relight_input(sample: RelightSample, mode: str) -> RelightInput:
    mode = resolve_mode(mode)
    if mode == RelightMode.IMAGE_BASED:
        return RelightInput.image_based(sample.fg, sample.fg_mask, sample.bg)
    if mode == RelightMode.TEXT_BASED:
        return RelightInput.text_based(sample.fg, sample.fg_mask, sample.prompt_tokens)
    return RelightInput(sample.fg, sample.fg_mask, sample.bg, sample.prompt_tokens, mode)


def score_sample(output: Array, sample: RelightSample) -> dict[str, Any]:
    rows, cols = foreground_box(sample.fg_mask)
    planar = sample.light_dir[:2]
    dcs = (
        directional_consistency(output, sample.fg_mask, sample.light_dir)
        if np.linalg.norm(planar) > 1e-9
        else None
    )
    return {
        "id": sample.sample_id,
        "direction": sample.light_meta.direction,
        "psnr": capped(psnr(output, sample.target)),
        "ssim": ssim(output, sample.target),
        "dcs": dcs,
        "psnr_fg": capped(psnr(output[rows, cols], sample.target[rows, cols])),
        "ssim_fg": ssim(output[rows, cols], sample.target[rows, cols]),
    }


def _mean(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def aggregate_scores(samples: list[dict[str, Any]]) -> dict[str, Any]:
    if not samples:
        raise ParameterError("Nothing to aggregate: no evaluated samples")
    return {
        "count": len(samples),
        "psnr": _mean([s["psnr"] for s in samples]),
        "ssim": _mean([s["ssim"] for s in samples]),
        "dcs": _mean([s["dcs"] for s in samples]),
        "dcs_cardinal": _mean(
            [s["dcs"] for s in samples if s["direction"] in CARDINAL_DIRECTIONS]
        ),
        "psnr_fg": _mean([s["psnr_fg"] for s in samples]),
        "ssim_fg": _mean([s["ssim_fg"] for s in samples]),
    }


def relight_sample(
    pipeline: RelightPipeline,
    sample: RelightSample,
    *,
    mode: str,
    steps: int,
    guidance: float,
    seed: int | list[int],
    eta: float = 0.0,
    fixer: Modulator | None = None,
) -> Array:
    output = pipeline.sample(relight_input(sample, mode), steps, guidance, seed, eta=eta)
    if fixer is not None:
        output = apply_fixer(output, sample.fg, sample.fg_mask, fixer)
    return output


def evaluate(
    checkpoint: Path | str,
    dataset: Path | str,
    config: RunConfig,
    *,
    split: str = "test",
    mode: str = "image",
    fixer_checkpoint: Path | str | None = None,
    variant: str = "full",
    timing: bool = False,
) -> EvalReport:
    """
    Relight every sample of a split (one task per sample) and score it against
    its target
    """
    from .tasks import evaluate_split

    if not Path(checkpoint).is_file():
        raise StateError(f"Checkpoint not found: {checkpoint}")
    samples = load_dataset(dataset, split)
    if not samples:
        raise StateError(f"Dataset split {split} in {dataset} is empty")
    started = time.perf_counter()
    scores = evaluate_split(
        checkpoint=str(checkpoint),
        fixer_checkpoint=str(fixer_checkpoint) if fixer_checkpoint and config.use_fixer else None,
        dataset=str(dataset),
        split=split,
        count=len(samples),
        mode=str(resolve_mode(mode)),
        steps=config.steps,
        guidance=config.guidance,
        eta=config.eta,
        seed=config.seed,
        hard_composite=config.hard_composite,
    )
    report = EvalReport(
        variant=variant,
        split=split,
        seed=config.seed,
        mode=str(resolve_mode(mode)),
        steps=config.steps,
        guidance=config.guidance,
        config=config.as_dict(),
        samples=scores,
        wall_clock=round(time.perf_counter() - started, 3) if timing else None,
    )
    logger.info(
        f"Evaluated {variant} on {len(scores)} {split} samples: "
        f"PSNR {report.aggregate['psnr']:.2f}, SSIM {report.aggregate['ssim']:.4f}"
    )
    return report


def summary_text(report: EvalReport) -> str:
    agg = report.aggregate

    def fmt(value: float | None, spec: str) -> str:
        return "n/a" if value is None else format(value, spec)

    lines = [
        f"variant: {report.variant}",
        f"split: {report.split} ({agg['count']} samples), mode: {report.mode}",
        f"seed: {report.seed}, steps: {report.steps}, guidance: {report.guidance:g}",
        f"PSNR (dB): {fmt(agg['psnr'], '.3f')}",
        f"SSIM: {fmt(agg['ssim'], '.4f')}",
        f"DCS: {fmt(agg['dcs'], '.4f')} (cardinal: {fmt(agg['dcs_cardinal'], '.4f')})",
        f"PSNR fg (dB): {fmt(agg['psnr_fg'], '.3f')}, SSIM fg: {fmt(agg['ssim_fg'], '.4f')}",
        "",
    ]
    lines += [f"note[{key}]: {text}" for key, text in report.metrics.items()]
    if report.wall_clock is not None:
        lines.append(f"wall clock (s): {report.wall_clock:.3f}")
    return "\n".join(lines) + "\n"


def write_json(path: Path, payload: Any) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise DatasetIOError(f"Cannot write {path}: {exc}") from exc
    return path


def write_report(report: EvalReport, out_dir: Path | str, name: str = "report") -> Path:
    out_dir = Path(out_dir)
    path = write_json(out_dir / f"{name}.json", report.as_dict())
    try:
        (out_dir / f"{name}_summary.txt").write_text(summary_text(report))
    except OSError as exc:
        raise DatasetIOError(f"Cannot write summary in {out_dir}: {exc}") from exc
    logger.info(f"Report written to {path}")
    return path


def variant_config(config: RunConfig, variant: str) -> RunConfig:
    if variant not in VARIANTS:
        raise ParameterError(f"Unknown ablation variant: {variant}")
    return config.replace(**VARIANTS[variant])


def train_relighting(
    config: RunConfig, samples: list[RelightSample], checkpoint: Path | str
) -> tuple[Path, list[float]]:
    trainer = RelightTrainer.from_config(config)
    history = trainer.fit(samples)
    path = RelightPipeline(trainer.model, hard_composite=config.hard_composite).save(checkpoint)
    return path, history


def train_fixer(
    config: RunConfig, images: list[Array], checkpoint: Path | str
) -> tuple[Path, list[float]]:
    if not images:
        raise StateError("No images to train the fixer on")
    trainer = FixerTrainer.from_config(config)
    history = trainer.fit(
        make_pairs(images, config.seed),
        config.fixer_steps,
        batch_size=config.batch_size,
        log_every=config.log_every,
    )
    return save_fixer(checkpoint, trainer.modulator), history


def _denoiser_key(config: RunConfig) -> tuple:
    return (config.use_adapter, config.use_spectral_filter, config.masked_adapter)


def run_ablation(
    config: RunConfig,
    dataset: Path | str,
    out_dir: Path | str,
    *,
    variants: list[str] | None = None,
    split: str = "test",
    mode: str = "image",
    timing: bool = False,
) -> dict[str, EvalReport]:
    """
    Train and evaluate every variant under the same seed and budget.

    Variants whose denoiser settings coincide share one trained model; the fixer
    is trained once on the training targets.
    """
    variants = variants or list(VARIANTS)
    out_dir = Path(out_dir)
    train = load_dataset(dataset, "train")
    if not train:
        raise StateError(f"Training split in {dataset} is empty")
    checkpoints: dict[tuple, Path] = {}
    fixer_path: Path | None = None
    reports = {}
    for name in variants:
        variant = variant_config(config, name)
        key = _denoiser_key(variant)
        if key not in checkpoints:
            logger.info(f"Training denoiser for variant {name}")
            checkpoints[key], _ = train_relighting(
                variant, train, out_dir / name / "relight.dlkt"
            )
        if variant.use_fixer and fixer_path is None:
            fixer_path, _ = train_fixer(
                variant, [s.target for s in train], out_dir / "fixer.dlkt"
            )
        report = evaluate(
            checkpoints[key],
            dataset,
            variant,
            split=split,
            mode=mode,
            fixer_checkpoint=fixer_path if variant.use_fixer else None,
            variant=name,
            timing=timing,
        )
        write_report(report, out_dir / name)
        reports[name] = report
    write_json(out_dir / "ablation.json", compare_reports(reports))
    return reports


def compare_reports(reports: dict[str, EvalReport]) -> dict[str, Any]:
    """
    Aggregates side by side, plus the share of samples on which ``full`` has the
    higher PSNR than each other variant
    """
    comparison: dict[str, Any] = {
        "aggregate": {name: dict(report.aggregate) for name, report in reports.items()}
    }
    if "full" in reports:
        full = {s["id"]: s["psnr"] for s in reports["full"].samples}
        wins = {}
        for name, report in reports.items():
            if name == "full":
                continue
            pairs = [(full[s["id"]], s["psnr"]) for s in report.samples if s["id"] in full]
            wins[name] = float(np.mean([a > b for a, b in pairs])) if pairs else None
        comparison["full_psnr_win_rate"] = wins
    return comparison


def dump_decay_maps(out_dir: Path | str, height: int, width: int) -> list[Path]:
    out_dir = Path(out_dir)
    return [
        save_pgm(out_dir / f"decay_{direction}.pgm", make_decay_map(direction, height, width).values)
        for direction in DIRECTION_ORDER
    ]


def condensation_heatmaps(model: Denoiser, background: Array) -> dict[str, Array]:
    """
    Mean attention of each direction group over the background positions,
    scaled to a peak of 1
    """
    if not model.config.use_adapter:
        raise StateError("Model has no light adapter to inspect")
    features = model.bg_encoder.forward(background)
    if model.enhancer is not None:
        features = model.enhancer.forward(features)
    model.condenser.forward(features, model.params["light_queries"])
    weights = model.condenser.attention.last_weights.values
    h, w = features.shape[:2]
    n_q = model.config.n_q
    n_queries = len(DIRECTION_ORDER) * n_q
    maps = {}
    for group, direction in enumerate(DIRECTION_ORDER):
        plane = weights[group * n_q : (group + 1) * n_q, n_queries:].mean(axis=0).reshape(h, w)
        peak = plane.max()
        maps[direction] = plane / peak if peak > 0 else plane
    return maps


def dump_attention(out_dir: Path | str, model: Denoiser, background: Array) -> list[Path]:
    out_dir = Path(out_dir)
    return [
        save_pgm(out_dir / f"attention_{direction}.pgm", plane)
        for direction, plane in condensation_heatmaps(model, background).items()
    ]


def dump_subbands(out_dir: Path | str, image: Array) -> list[Path]:
    split = haar_analyze(image)
    out_dir = Path(out_dir)
    return [
        save_ppm(out_dir / "subband_lq.ppm", split.lq),
        save_ppm(out_dir / "subband_hq.ppm", split.hq + 0.5),
    ]
