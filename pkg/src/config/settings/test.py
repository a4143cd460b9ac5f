"""
Test settings for DreamLight Desk
"""

from .base import *

DEBUG = True

# Force Celery to run in eager mode for tests
CELERY_TASK_ALWAYS_EAGER = True
CELERY_TASK_EAGER_PROPAGATES = True

# Override Celery broker and result backend to use memory
CELERY_BROKER_URL = "memory://"
CELERY_RESULT_BACKEND = "cache+memory://"

# Disable logging during tests
LOGGING = {
    "version": 1,
    "disable_existing_loggers": True,
    "handlers": {
        "null": {
            "class": "logging.NullHandler",
        },
    },
    "root": {
        "handlers": ["null"],
    },
}

# Small defaults so unit tests build tiny models
DREAMLIGHT = {
    **DREAMLIGHT,
    "resolution": 16,
    "d": 4,
    "n_q": 1,
    "T": 20,
    "steps": 4,
    "batch_size": 2,
    "train_steps": 4,
    "fixer_width": 4,
    "fixer_steps": 4,
    "log_every": 1,
}
