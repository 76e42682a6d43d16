import json

from django.conf import settings
from django.core.checks import Error, Tags, Warning, register
from django.core.exceptions import ImproperlyConfigured
from django.utils.module_loading import import_string

from .conf import KEYS, get_run_config

PALETTE_SIZES = (4, 5)


@register(Tags.compatibility)
def check_run_config(app_configs, **kwargs):
    errors = []
    defaults = getattr(settings, "FLOWATTR", None)
    if not isinstance(defaults, dict):
        return [Error("FLOWATTR must be a dictionary.", id="attribution.E001")]
    missing = sorted(set(KEYS) - set(defaults))
    if missing:
        errors.append(Error(f"FLOWATTR is missing keys: {', '.join(missing)}.", id="attribution.E002"))
        return errors
    try:
        config = get_run_config()
    except ImproperlyConfigured as error:
        return [Error(str(error), id="attribution.E003")]
    registry = getattr(settings, "FLOWATTR_BACKENDS", {})
    for name, path in registry.items():
        try:
            import_string(path)
        except ImportError:
            errors.append(Error(f"Backend {name!r} points at {path}, which cannot be imported.", id="attribution.E004"))
    if config.backend not in registry:
        errors.append(Error(f"Default backend {config.backend!r} is not registered.", id="attribution.E005"))
    return errors


@register(Tags.compatibility, deploy=True)
def check_credentials(app_configs, **kwargs):
    try:
        config = get_run_config()
    except ImproperlyConfigured:
        return []
    if config.backend == "http" and not (config.endpoint_url and config.api_key):
        return [
            Warning(
                "The http backend has no endpoint or API key configured.",
                hint="Set FLOWATTR_ENDPOINT_URL and FLOWATTR_API_KEY, or pick another backend.",
                id="attribution.W001",
            )
        ]
    return []


@register(Tags.compatibility)
def check_style_tables(app_configs, **kwargs):
    path = getattr(settings, "FLOWATTR_STYLE_TABLES", None)
    try:
        with open(path, encoding="utf-8") as handle:
            tables = json.load(handle)
    except (OSError, TypeError, json.JSONDecodeError) as error:
        return [Error(f"Style tables at {path} cannot be loaded: {error}", id="attribution.E010")]
    errors = []
    for family in ("default", "black_white", "colored"):
        if not isinstance(tables.get(family), dict):
            errors.append(Error(f"Style tables lack the {family!r} family.", id="attribution.E011"))
    colors = tables.get("single_color") or []
    if len(set(colors)) != len(colors) or not colors:
        errors.append(Error("single_color must be a non-empty list of distinct colours.", id="attribution.E012"))
    palettes = tables.get("multi_color") or []
    if not palettes or any(len(palette) not in PALETTE_SIZES for palette in palettes):
        errors.append(Error("Every multi_color palette must hold 4 or 5 colours.", id="attribution.E013"))
    return errors
