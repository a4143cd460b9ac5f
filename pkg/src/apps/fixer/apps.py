from django.apps import AppConfig


class FixerConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "src.apps.fixer"
