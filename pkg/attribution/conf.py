"""
Run configuration: flags > environment > JSON config file > settings.FLOWATTR.
"""
import dataclasses
import json
import os
from pathlib import Path

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

ENVIRONMENT = {
    "endpoint_url": "FLOWATTR_ENDPOINT_URL",
    "api_key": "FLOWATTR_API_KEY",
    "model": "FLOWATTR_MODEL",
    "timeout": "FLOWATTR_TIMEOUT",
    "max_retries": "FLOWATTR_MAX_RETRIES",
    "request_concurrency": "FLOWATTR_CONCURRENCY",
    "backend": "FLOWATTR_BACKEND",
}
CONFIG_FILE_VARIABLE = "FLOWATTR_CONFIG"


@dataclasses.dataclass(frozen=True)
class RunConfig:
    endpoint_url: str
    api_key: str = dataclasses.field(repr=False)
    model: str
    timeout: float
    max_retries: int
    backoff_base: float
    request_concurrency: int
    episode_concurrency: int
    backend: str
    max_steps: int
    iou_threshold: float
    seed: int
    style: str
    script_path: str
    cassette_path: str
    temperature: float

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_json(self):
        data = dataclasses.asdict(self)
        data["api_key"] = "[REDACTED]" if self.api_key else ""
        return data


KEYS = {field.name: field.type for field in dataclasses.fields(RunConfig)}


def _check_keys(values, source):
    unknown = sorted(set(values) - set(KEYS))
    if unknown:
        raise ImproperlyConfigured(f"Unknown configuration keys in {source}: {', '.join(unknown)}.")


def load_config_file(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as error:
        raise ImproperlyConfigured(f"Cannot read config file {path}: {error}") from error
    except json.JSONDecodeError as error:
        raise ImproperlyConfigured(f"Config file {path} is not valid JSON: {error}") from error
    if not isinstance(data, dict):
        raise ImproperlyConfigured(f"Config file {path} must hold a JSON object.")
    _check_keys(data, path)
    return data


def _coerce(key, value):
    kind = KEYS[key]
    if kind is str:
        return "" if value is None else str(value)
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ImproperlyConfigured(f"{key} must be {kind.__name__}, got {value!r}.") from None


def _validate(config):
    if config.timeout <= 0:
        raise ImproperlyConfigured("timeout must be positive.")
    for key in ("max_retries", "request_concurrency", "episode_concurrency", "max_steps"):
        if getattr(config, key) < 1:
            raise ImproperlyConfigured(f"{key} must be at least 1.")
    if not 0 < config.iou_threshold <= 1:
        raise ImproperlyConfigured("iou_threshold must lie in (0, 1].")
    if config.backoff_base < 0:
        raise ImproperlyConfigured("backoff_base must not be negative.")


def get_run_config(overrides=None, config_file=None):
    """
    Resolve a RunConfig. ``overrides`` are command flags; None values mean
    "not given" and fall through to the next source.
    """
    defaults = dict(getattr(settings, "FLOWATTR", {}))
    _check_keys(defaults, "settings.FLOWATTR")
    values = dict(defaults)

    path = config_file or os.environ.get(CONFIG_FILE_VARIABLE)
    if path:
        values.update(load_config_file(path))

    for key, variable in ENVIRONMENT.items():
        if os.environ.get(variable):
            values[key] = os.environ[variable]

    overrides = {key: value for key, value in (overrides or {}).items() if value is not None}
    _check_keys(overrides, "overrides")
    values.update(overrides)

    missing = sorted(set(KEYS) - set(values))
    if missing:
        raise ImproperlyConfigured(f"Missing configuration keys: {', '.join(missing)}.")
    config = RunConfig(**{key: _coerce(key, value) for key, value in values.items()})
    _validate(config)
    return config
