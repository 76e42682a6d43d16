from django.apps import AppConfig


class AttributionConfig(AppConfig):
    name = 'attribution'
    verbose_name = 'Flowchart attribution'

    def ready(self):
        from . import checks  # noqa: F401
