# Import Celery so Django recognizes it and shared tasks bind to the configured app
from .celery import app as celery_app

__all__ = ("celery_app",)
