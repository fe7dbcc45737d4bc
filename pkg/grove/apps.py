from django.apps import AppConfig


class GroveConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "grove"
    verbose_name = "Random forest engine"
