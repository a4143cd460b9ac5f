"""
Enumerations shared across apps
"""

from django.db import models


class Direction(models.TextChoices):
    """
    Light direction groups of the adapter
    """

    LEFT = "left", "Left"
    RIGHT = "right", "Right"
    TOP = "top", "Top"
    DOWN = "down", "Down"


class RelightMode(models.TextChoices):
    IMAGE_BASED = "image_based", "Image based"
    TEXT_BASED = "text_based", "Text based"
    BOTH = "both", "Both"


class MaskMode(models.TextChoices):
    """
    Where the decay maps enter the attention
    """

    POST_SOFTMAX = "post_softmax", "Multiply softmax output, renormalize"
    LOGIT_BIAS = "logit_bias", "Additive bias on the logits"


class BackgroundStyle(models.TextChoices):
    GRADIENT_SKY = "gradient_sky", "Gradient sky"
    FLAT = "flat", "Flat"
    TWO_TONE = "two_tone", "Two tone"


class SceneObject(models.TextChoices):
    SPHERE = "sphere", "Sphere"
    BOX = "box", "Box"


DIRECTION_ORDER = (Direction.LEFT, Direction.RIGHT, Direction.TOP, Direction.DOWN)
