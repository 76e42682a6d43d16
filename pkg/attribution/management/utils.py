"""
Shared pieces of the management commands: exit codes and JSON output.
"""
import json
from pathlib import Path

from django.core.management.base import CommandError

EXIT_IO = 1
EXIT_USAGE = 2
EXIT_BACKEND = 3


def fail(message, returncode):
    return CommandError(message, returncode=returncode)


def dumps(data):
    return json.dumps(data, indent=2, ensure_ascii=False, sort_keys=True)


def write_output(command, data, path=None):
    """Write a JSON document to ``path``, or to the command's stdout when no path is given."""
    text = dumps(data)
    if not path:
        command.stdout.write(text)
        return
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n", encoding="utf-8")
    except OSError as error:
        raise fail(f"Cannot write {path}: {error}", EXIT_IO) from error


def read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as error:
        raise fail(f"Cannot read {path}: {error}", EXIT_IO) from error


def write_diagnostics(stream, diagnostics):
    """One JSON object per parse diagnostic, one per line."""
    for diagnostic in diagnostics:
        stream.write(json.dumps(diagnostic.to_json(), ensure_ascii=False, sort_keys=True))
