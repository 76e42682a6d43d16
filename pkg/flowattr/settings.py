"""
Django settings for flowattr project.

The project has no web surface and no database: Django provides settings,
management commands, forms, templates and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'flowattr-local-only-key')

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'attribution',
]

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [],
        },
    },
]

DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/4.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Attribution toolkit defaults. Environment variables and the JSON config
# file named by FLOWATTR_CONFIG override these; command flags override both.

FLOWATTR = {
    'endpoint_url': '',
    'api_key': '',
    'model': 'gpt-4o',
    'timeout': 60.0,
    'max_retries': 3,
    'backoff_base': 1.0,
    'request_concurrency': 4,
    'episode_concurrency': 1,
    'backend': 'http',
    'max_steps': 8,
    'iou_threshold': 0.7,
    'seed': 0,
    'style': 'default',
    'script_path': '',
    'cassette_path': '',
    'temperature': 0.0,
}

FLOWATTR_BACKENDS = {
    'http': 'attribution.backends.HttpChatBackend',
    'scripted': 'attribution.backends.ScriptedBackend',
    'cassette': 'attribution.backends.CassetteBackend',
    'ground_truth': 'attribution.backends.GroundTruthBackend',
}

FLOWATTR_STYLE_TABLES = BASE_DIR / 'attribution' / 'data' / 'styles.json'


LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'filters': {
        'redact_secrets': {
            '()': 'attribution.log.RedactSecretsFilter',
        },
    },
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
            'filters': ['redact_secrets'],
        },
    },
    'loggers': {
        'attribution': {
            'handlers': ['console'],
            'level': os.environ.get('FLOWATTR_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
