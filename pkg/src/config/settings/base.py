"""
Base Django settings for DreamLight Desk
"""

from pathlib import Path

from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

# No HTTP surface is served; the key only satisfies Django's startup checks.
SECRET_KEY = config("SECRET_KEY", default="dreamlight-desk-local-key")

DEBUG = config("DEBUG", default=False, cast=bool)

ALLOWED_HOSTS: list[str] = []

# Application definition
DJANGO_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
]

THIRD_PARTY_APPS = [
    "rest_framework",
]

LOCAL_APPS = [
    "src.apps.core",
    "src.apps.spectral",
    "src.apps.adapter",
    "src.apps.relighting",
    "src.apps.fixer",
    "src.apps.synthdata",
    "src.apps.evaluation",
]

INSTALLED_APPS = DJANGO_APPS + THIRD_PARTY_APPS + LOCAL_APPS

# Run records live on disk (datasets, checkpoints, reports); the database is unused.
DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": ":memory:",
    }
}

# Internationalization
LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# Celery Configuration
CELERY_BROKER_URL = config("CELERY_BROKER_URL", default="memory://")
CELERY_RESULT_BACKEND = config("CELERY_RESULT_BACKEND", default="cache+memory://")
CELERY_TASK_ALWAYS_EAGER = config("CELERY_TASK_ALWAYS_EAGER", default=True, cast=bool)
CELERY_TASK_EAGER_PROPAGATES = True
CELERY_ACCEPT_CONTENT = ["json"]
CELERY_TASK_SERIALIZER = "json"
CELERY_RESULT_SERIALIZER = "json"
CELERY_TIMEZONE = TIME_ZONE

# Relighting defaults. Every key can be overridden from the environment, then by a
# run configuration file (--config), then by command-line flags.
DREAMLIGHT = {
    "resolution": config("DREAMLIGHT_RESOLUTION", default=64, cast=int),
    "d": config("DREAMLIGHT_D", default=32, cast=int),
    "n_q": config("DREAMLIGHT_N_Q", default=4, cast=int),
    "heads": config("DREAMLIGHT_HEADS", default=1, cast=int),
    "sigma": config("DREAMLIGHT_SIGMA", default=5.0, cast=float),
    "T": config("DREAMLIGHT_T", default=200, cast=int),
    "steps": config("DREAMLIGHT_STEPS", default=20, cast=int),
    "guidance": config("DREAMLIGHT_GUIDANCE", default=2.0, cast=float),
    "eta": config("DREAMLIGHT_ETA", default=0.0, cast=float),
    "lr": config("DREAMLIGHT_LR", default=2e-4, cast=float),
    "seed": config("DREAMLIGHT_SEED", default=0, cast=int),
    "mask_mode": config("DREAMLIGHT_MASK_MODE", default="post_softmax"),
    "logit_bias_scale": config("DREAMLIGHT_LOGIT_BIAS_SCALE", default=4.0, cast=float),
    "batch_size": config("DREAMLIGHT_BATCH_SIZE", default=8, cast=int),
    "train_steps": config("DREAMLIGHT_TRAIN_STEPS", default=20000, cast=int),
    "cond_dropout": config("DREAMLIGHT_COND_DROPOUT", default=0.1, cast=float),
    "text_mode_ratio": config("DREAMLIGHT_TEXT_MODE_RATIO", default=0.3, cast=float),
    "hard_composite": config("DREAMLIGHT_HARD_COMPOSITE", default=True, cast=bool),
    "use_adapter": config("DREAMLIGHT_USE_ADAPTER", default=True, cast=bool),
    "use_spectral_filter": config(
        "DREAMLIGHT_USE_SPECTRAL_FILTER", default=True, cast=bool
    ),
    "masked_adapter": config("DREAMLIGHT_MASKED_ADAPTER", default=True, cast=bool),
    "use_fixer": config("DREAMLIGHT_USE_FIXER", default=True, cast=bool),
    "fixer_width": config("DREAMLIGHT_FIXER_WIDTH", default=32, cast=int),
    "fixer_lr": config("DREAMLIGHT_FIXER_LR", default=1e-3, cast=float),
    "fixer_steps": config("DREAMLIGHT_FIXER_STEPS", default=2000, cast=int),
    "perceptual_weight": config("DREAMLIGHT_PERCEPTUAL_WEIGHT", default=0.1, cast=float),
    "log_every": config("DREAMLIGHT_LOG_EVERY", default=100, cast=int),
}
