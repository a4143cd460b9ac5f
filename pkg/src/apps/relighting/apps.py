from django.apps import AppConfig


class RelightingConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "src.apps.relighting"
