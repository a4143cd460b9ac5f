from django.apps import AppConfig


class SynthdataConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "src.apps.synthdata"
