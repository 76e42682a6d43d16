"""
Chat backends.

``HttpChatBackend`` talks to a chat-completions endpoint with function
calling. The scripted, replay, cassette and ground-truth backends answer
deterministically and never touch the network.
"""
import base64
import hashlib
import json
import logging
import mimetypes
import threading
from dataclasses import dataclass, field
from pathlib import Path

import backoff
import requests
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured
from django.utils.module_loading import import_string

from .log import redact, register_secret
from .tools import FINAL_ANSWER, ToolCall

logger = logging.getLogger(__name__)

MAX_IMAGE_BYTES = 8 * 1024 * 1024
PLANNING_NOTE = "Planning: inspect the labeled nodes named in the question before answering."
ROLES = ("system", "user", "assistant", "tool")


class BackendError(Exception):
    KINDS = ("transport", "rate_limited", "malformed_response", "timeout")

    def __init__(self, kind, detail="", retriable=None):
        if kind not in self.KINDS:
            raise ValueError(f"Unknown backend error kind {kind!r}.")
        super().__init__(f"{kind}: {detail}" if detail else kind)
        self.kind = kind
        self.detail = detail
        self.retriable = kind in ("rate_limited", "timeout") if retriable is None else retriable

    def to_json(self):
        return {"kind": self.kind, "retriable": self.retriable, "detail": redact(self.detail)}


@dataclass(frozen=True)
class ImageAttachment:
    media_type: str
    data: str = field(repr=False)

    @classmethod
    def from_bytes(cls, content, media_type):
        if len(content) > MAX_IMAGE_BYTES:
            raise ValueError(f"Image is {len(content)} bytes; the limit is {MAX_IMAGE_BYTES}. Downscale it first.")
        return cls(media_type, base64.b64encode(content).decode("ascii"))

    @classmethod
    def from_path(cls, path):
        path = Path(path)
        media_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        if path.suffix.lower() == ".svg":
            media_type = "image/svg+xml"
        return cls.from_bytes(path.read_bytes(), media_type)

    @property
    def data_uri(self):
        return f"data:{self.media_type};base64,{self.data}"


@dataclass(frozen=True)
class ChatMessage:
    role: str
    text: str = ""
    image: ImageAttachment = None
    tool_call: ToolCall = None
    tool_call_id: str = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"Unknown message role {self.role!r}.")

    def without_image(self):
        return ChatMessage(self.role, self.text, None, self.tool_call, self.tool_call_id)

    def to_wire(self):
        if self.role == "tool":
            return {"role": "tool", "tool_call_id": self.tool_call_id, "content": self.text}
        if self.tool_call is not None:
            return {
                "role": "assistant",
                "content": self.text or None,
                "tool_calls": [
                    {
                        "id": self.tool_call.call_id,
                        "type": "function",
                        "function": {
                            "name": self.tool_call.tool,
                            "arguments": json.dumps(self.tool_call.arguments, sort_keys=True),
                        },
                    }
                ],
            }
        if self.image is not None:
            return {
                "role": self.role,
                "content": [
                    {"type": "text", "text": self.text},
                    {"type": "image_url", "image_url": {"url": self.image.data_uri}},
                ],
            }
        return {"role": self.role, "content": self.text}


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple
    tools: tuple = ()
    decoding: dict = field(default_factory=dict)

    def __post_init__(self):
        images = sum(1 for message in self.messages if message.image is not None)
        if images > 1:
            raise ValueError("A chat request carries at most one image.")

    @property
    def has_image(self):
        return any(message.image is not None for message in self.messages)

    @property
    def tool_names(self):
        return [schema["name"] for schema in self.tools]

    def to_wire(self):
        return {
            "messages": [message.to_wire() for message in self.messages],
            "tools": list(self.tools),
            "decoding": dict(self.decoding),
        }

    def digest(self):
        payload = json.dumps(self.to_wire(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatReply:
    text: str = ""
    tool_call: ToolCall = None

    def to_json(self):
        return {"text": self.text, "tool_call": self.tool_call.to_json() if self.tool_call else None}

    @classmethod
    def from_json(cls, data):
        call = data.get("tool_call")
        return cls(data.get("text") or "", ToolCall.from_json(call) if call else None)


def first_json_object(text):
    """Return the first decodable JSON object embedded in free text, or None."""
    decoder = json.JSONDecoder()
    index = text.find("{")
    while index >= 0:
        try:
            value, _ = decoder.raw_decode(text, index)
        except json.JSONDecodeError:
            index = text.find("{", index + 1)
            continue
        if isinstance(value, dict):
            return value
        index = text.find("{", index + 1)
    return None


def _inline_tool_call(text):
    value = first_json_object(text or "")
    if not value:
        return None
    name = value.get("tool") or value.get("name")
    arguments = value.get("arguments", value.get("parameters", {}))
    if not isinstance(name, str) or not isinstance(arguments, dict):
        return None
    return ToolCall(name, arguments, "")


def parse_completion(body):
    """Turn a chat-completions response body into a ChatReply."""
    try:
        message = body["choices"][0]["message"]
    except (KeyError, IndexError, TypeError):
        raise BackendError("malformed_response", "response has no choices[0].message") from None
    text = message.get("content") or ""
    if isinstance(text, list):
        text = "".join(part.get("text", "") for part in text if isinstance(part, dict))
    for tool_call in message.get("tool_calls") or []:
        function = tool_call.get("function") or {}
        arguments = function.get("arguments") or {}
        if isinstance(arguments, str):
            try:
                arguments = json.loads(arguments) if arguments.strip() else {}
            except json.JSONDecodeError:
                raise BackendError("malformed_response", f"tool arguments are not JSON: {arguments[:80]!r}") from None
        if not function.get("name") or not isinstance(arguments, dict):
            raise BackendError("malformed_response", "tool call without a name or object arguments")
        return ChatReply(text, ToolCall(function["name"], arguments, tool_call.get("id") or ""))
    return ChatReply(text, _inline_tool_call(text))


def _script_reply(entry):
    if isinstance(entry, str):
        return ChatReply(entry)
    if isinstance(entry, dict) and "tool" in entry:
        return ChatReply(entry.get("text", ""), ToolCall(entry["tool"], dict(entry.get("arguments") or {}), ""))
    if isinstance(entry, dict):
        return ChatReply.from_json(entry)
    raise ImproperlyConfigured(f"Unrecognised script entry {entry!r}.")


class ChatBackend:
    """
    Contract: ``chat(request)`` returns a ChatReply holding free text and at
    most one tool call, or raises BackendError. ``bind(sample)`` returns the
    backend to use for one dataset sample.
    """

    name = "base"

    @classmethod
    def from_config(cls, config):
        return cls()

    def bind(self, sample):
        return self

    def chat(self, request):
        raise NotImplementedError


class HttpChatBackend(ChatBackend):
    name = "http"

    def __init__(
        self,
        endpoint_url,
        api_key,
        model,
        timeout=60.0,
        max_retries=3,
        backoff_base=1.0,
        concurrency=4,
    ):
        self.endpoint_url = endpoint_url
        self.model = model
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._api_key = api_key
        self._local = threading.local()
        self._limiter = threading.BoundedSemaphore(concurrency)
        register_secret(api_key)

    def __repr__(self):
        return f"<HttpChatBackend {self.endpoint_url} model={self.model}>"

    @classmethod
    def from_config(cls, config):
        if not config.endpoint_url:
            raise ImproperlyConfigured("The http backend needs an endpoint URL (FLOWATTR_ENDPOINT_URL).")
        if not config.api_key:
            raise ImproperlyConfigured("The http backend needs a credential (FLOWATTR_API_KEY).")
        return cls(
            config.endpoint_url,
            config.api_key,
            config.model,
            timeout=config.timeout,
            max_retries=config.max_retries,
            backoff_base=config.backoff_base,
            concurrency=config.request_concurrency,
        )

    @property
    def session(self):
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            self._local.session = session
        return session

    def payload(self, request):
        payload = {"model": self.model, "messages": [message.to_wire() for message in request.messages]}
        payload.update(request.decoding)
        if request.tools:
            payload["tools"] = [{"type": "function", "function": schema} for schema in request.tools]
            payload["tool_choice"] = "auto"
        return payload

    def chat(self, request):
        retrying = backoff.on_exception(
            backoff.expo,
            BackendError,
            max_tries=self.max_retries,
            giveup=lambda error: not error.retriable,
            jitter=backoff.full_jitter,
            factor=self.backoff_base,
            logger=logger,
        )
        return retrying(self._send)(request)

    def _send(self, request):
        payload = self.payload(request)
        headers = {"Authorization": f"Bearer {self._api_key}", "Content-Type": "application/json"}
        logger.debug("chat request %s: %s", self.endpoint_url, redact(json.dumps(payload)))
        with self._limiter:
            try:
                response = self.session.post(self.endpoint_url, json=payload, headers=headers, timeout=self.timeout)
            except requests.Timeout as error:
                raise BackendError("timeout", str(error)) from error
            except requests.RequestException as error:
                raise BackendError("transport", str(error), retriable=True) from error
        if response.status_code == 429:
            raise BackendError("rate_limited", "HTTP 429")
        if response.status_code >= 500:
            raise BackendError("transport", f"HTTP {response.status_code}", retriable=True)
        if response.status_code >= 400:
            raise BackendError("transport", f"HTTP {response.status_code}: {response.text[:200]}", retriable=False)
        try:
            body = response.json()
        except ValueError:
            raise BackendError("malformed_response", f"invalid JSON: {response.text[:80]!r}") from None
        logger.debug("chat response: %s", redact(json.dumps(body)[:4000]))
        return parse_completion(body)


class ScriptedBackend(ChatBackend):
    """
    Replies from a fixed script. Requests without tools (planning, transcription)
    take the next entry only when it is plain text.
    """

    name = "scripted"

    def __init__(self, script, by_sample=None):
        self.script = list(script or [])
        self.by_sample = by_sample
        self.requests = []
        self._position = 0
        self._lock = threading.Lock()

    @classmethod
    def from_config(cls, config):
        if not config.script_path:
            raise ImproperlyConfigured("The scripted backend needs script_path.")
        try:
            data = json.loads(Path(config.script_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as error:
            raise ImproperlyConfigured(f"Cannot load script {config.script_path}: {error}") from error
        if isinstance(data, dict):
            return cls([], by_sample=data)
        return cls(data)

    def bind(self, sample):
        if self.by_sample is not None:
            return type(self)(self.by_sample.get(sample.id, []))
        return type(self)(self.script)

    @property
    def remaining(self):
        return len(self.script) - self._position

    def chat(self, request):
        with self._lock:
            self.requests.append(request)
            if self._position >= len(self.script):
                raise BackendError("transport", "script exhausted", retriable=False)
            reply = _script_reply(self.script[self._position])
            if not request.tools and reply.tool_call is not None:
                return ChatReply(PLANNING_NOTE)
            self._position += 1
            return reply


class ReplayBackend(ScriptedBackend):
    name = "replay"

    @classmethod
    def from_trace(cls, trace):
        script = []
        for step in trace.steps:
            if step.call is not None:
                script.append({"text": step.model_text, "tool_call": step.call.to_json()})
            else:
                script.append(step.model_text)
        return cls(script)


class CassetteBackend(ChatBackend):
    """
    Replays JSON lines of ``{request_digest, reply}``. With an inner backend,
    unknown requests are forwarded and recorded.
    """

    name = "cassette"

    def __init__(self, path, inner=None):
        self.path = Path(path)
        self.inner = inner
        self._lock = threading.Lock()
        self._replies = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    entry = json.loads(line)
                    self._replies[entry["request_digest"]] = entry["reply"]

    @classmethod
    def from_config(cls, config):
        if not config.cassette_path:
            raise ImproperlyConfigured("The cassette backend needs cassette_path.")
        inner = HttpChatBackend.from_config(config) if config.endpoint_url else None
        return cls(config.cassette_path, inner)

    def __len__(self):
        return len(self._replies)

    def chat(self, request):
        digest = request.digest()
        with self._lock:
            recorded = self._replies.get(digest)
        if recorded is not None:
            return ChatReply.from_json(recorded)
        if self.inner is None:
            raise BackendError("transport", f"no cassette entry for request {digest[:12]}", retriable=False)
        reply = self.inner.chat(request)
        with self._lock:
            self._replies[digest] = reply.to_json()
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps({"request_digest": digest, "reply": reply.to_json()}) + "\n")
        return reply


class GroundTruthBackend(ChatBackend):
    """Answers every episode with the bound sample's ground-truth nodes."""

    name = "ground_truth"

    def __init__(self, gt_nodes=None):
        self.gt_nodes = list(gt_nodes) if gt_nodes is not None else None

    def bind(self, sample):
        return type(self)(sample.gt_nodes)

    def chat(self, request):
        if self.gt_nodes is None:
            raise BackendError("transport", "ground-truth backend used without a sample", retriable=False)
        if not request.tools:
            return ChatReply(f"Planning: nodes to explore are {', '.join(self.gt_nodes)}.")
        looked_up = any(message.role == "tool" for message in request.messages)
        if self.gt_nodes and not looked_up and "get_statement" in request.tool_names:
            return ChatReply("", ToolCall("get_statement", {"node_id": self.gt_nodes[0]}, ""))
        answer = {"nodes": self.gt_nodes, "reasoning": "ground-truth attribution"}
        return ChatReply("", ToolCall(FINAL_ANSWER, {"answer": answer}, ""))


def load_backend(name, config):
    """Instantiate a backend registered in settings.FLOWATTR_BACKENDS."""
    registry = getattr(settings, "FLOWATTR_BACKENDS", {})
    if name not in registry:
        raise ImproperlyConfigured(f"Unknown backend {name!r}; choose from {', '.join(sorted(registry))}.")
    backend_class = import_string(registry[name])
    return backend_class.from_config(config)
