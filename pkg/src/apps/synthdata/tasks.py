"""
Async tasks for dataset rendering
"""

import logging

from celery import group, shared_task

from .services import write_sample

logger = logging.getLogger(__name__)


@shared_task
def render_dataset_sample(out_dir, split, index, seed, resolution):
    """
    Render one scene into ``out_dir/split`` and return its metadata record
    """
    try:
        return write_sample(out_dir, split, index, seed, resolution)
    except Exception as e:
        logger.error(f"Error rendering sample {index} into {split}: {str(e)}", exc_info=True)
        raise


def render_split(out_dir, split, indices, seed, resolution):
    """
    Fan one split out as a group; records come back in dispatch order
    """
    if not indices:
        return []
    job = group(
        render_dataset_sample.s(out_dir, split, index, seed, resolution) for index in indices
    )
    logger.info(f"Rendering {len(indices)} samples for split {split}")
    return job.apply_async().get(disable_sync_subtasks=False)
