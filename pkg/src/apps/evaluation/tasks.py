"""
Async tasks for evaluation
"""

import logging
from functools import lru_cache

from celery import group, shared_task

from src.apps.fixer.services import load_fixer
from src.apps.relighting.services import RelightPipeline
from src.apps.synthdata.services import load_dataset

from .services import relight_sample, score_sample

logger = logging.getLogger(__name__)


@lru_cache(maxsize=4)
def cached_pipeline(checkpoint, hard_composite):
    return RelightPipeline.from_checkpoint(checkpoint, hard_composite=hard_composite)


@lru_cache(maxsize=4)
def cached_fixer(checkpoint):
    return load_fixer(checkpoint)


@lru_cache(maxsize=4)
def cached_split(dataset, split):
    return tuple(load_dataset(dataset, split))


@shared_task
def evaluate_sample(
    checkpoint,
    fixer_checkpoint,
    dataset,
    split,
    index,
    mode,
    steps,
    guidance,
    eta,
    seed,
    hard_composite,
):
    """
    Relight sample ``index`` of a split and return its scores
    """
    try:
        sample = cached_split(dataset, split)[index]
        output = relight_sample(
            cached_pipeline(checkpoint, hard_composite),
            sample,
            mode=mode,
            steps=steps,
            guidance=guidance,
            seed=[seed, index],
            eta=eta,
            fixer=cached_fixer(fixer_checkpoint) if fixer_checkpoint else None,
        )
        scores = score_sample(output, sample)
        logger.debug(f"Scored sample {sample.sample_id}: {scores}")
        return scores
    except Exception as e:
        logger.error(f"Error evaluating sample {index} of {split}: {str(e)}", exc_info=True)
        raise


def evaluate_split(*, count, **kwargs):
    """
    One task per sample; scores come back in sample order
    """
    job = group(evaluate_sample.s(index=index, **kwargs) for index in range(count))
    results = job.apply_async().get(disable_sync_subtasks=False)
    cached_split.cache_clear()
    cached_pipeline.cache_clear()
    cached_fixer.cache_clear()
    return results
