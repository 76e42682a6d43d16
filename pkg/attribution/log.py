import logging
import os
import re
import threading

BEARER_RE = re.compile(r"(Bearer\s+)[^\s'\",]+", re.IGNORECASE)
DATA_URI_RE = re.compile(r"(data:image/[\w.+-]+;base64,)[A-Za-z0-9+/=]{16,}")
REDACTED = "[REDACTED]"

_secrets = set()
_lock = threading.Lock()


def register_secret(value):
    """Remember a credential so every log record passing the filter is scrubbed of it."""
    if value:
        with _lock:
            _secrets.add(value)


def redact(text):
    text = BEARER_RE.sub(r"\1" + REDACTED, text)
    text = DATA_URI_RE.sub(r"\1<elided>", text)
    env_key = os.environ.get("FLOWATTR_API_KEY")
    with _lock:
        secrets = set(_secrets)
    if env_key:
        secrets.add(env_key)
    for secret in sorted(secrets, key=len, reverse=True):
        text = text.replace(secret, REDACTED)
    return text


class RedactSecretsFilter(logging.Filter):
    def filter(self, record):
        message = record.getMessage()
        scrubbed = redact(message)
        if scrubbed != message:
            record.msg = scrubbed
            record.args = ()
        return True
