"""Configure Django for pytest collection, mirroring ``manage.py test``."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'flowattr.settings')
django.setup()


def pytest_sessionstart(session):
    from django.test.utils import setup_test_environment
    setup_test_environment()
