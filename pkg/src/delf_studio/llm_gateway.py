"""Chat-model access with interchangeable backends.

Every backend answers one self-contained conversation at a time through
``complete()``. The live backend speaks the common ``/chat/completions`` HTTP
shape. The replay backend replays a recorded transcript strictly in order,
matching each incoming request by hash, so runs are reproducible without
network access. The scripted backend serves queued replies for tests and
fixture recording; the recording backend tees any backend's traffic to a
transcript file that the replay backend can consume later.

Request hashing covers what determines a reply (roles, contents, model name)
and deliberately ignores sampling and transport settings such as temperature
or timeout, so replays survive those being tuned.

No code here interprets reply content; parsing lives in response_parser.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

import filelock
import httpx

from .chat import Conversation

API_KEY_ENV_VAR = "DELF_API_KEY"
TRANSCRIPT_SCHEMA_VERSION = 1

BACKEND_KINDS = ("live", "replay", "scripted")


@dataclass(frozen=True)
class ModelReply:
    content: str
    backend_id: str
    latency_ms: float = 0.0
    usage: Mapping[str, Any] | None = None


@dataclass(frozen=True)
class BackendConfig:
    """One config shape for all backend kinds; unused fields stay at their
    defaults. Credentials never live here: the live backend reads DELF_API_KEY
    from the environment at call time."""

    kind: str
    model: str = "default"
    endpoint: str = ""
    temperature: float = 0.0
    timeout_seconds: float = 30.0
    max_retries: int = 3
    backoff_base_seconds: float = 1.0
    transcript_path: str | None = None

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}; expected one of {BACKEND_KINDS}")
        if self.kind == "live" and not self.endpoint:
            raise ValueError("live backend requires an endpoint URL")
        if self.kind == "replay" and not self.transcript_path:
            raise ValueError("replay backend requires a transcript path")


class GatewayError(RuntimeError):
    """The backend could not produce a reply."""


class GatewayTimeout(GatewayError):
    pass


class TransportFailure(GatewayError):
    pass


class MissingCredential(GatewayError):
    pass


class ReplayError(GatewayError):
    pass


class ReplayMismatch(ReplayError):
    def __init__(self, index: int, expected_hash: str, actual_hash: str):
        self.index = index
        self.expected_hash = expected_hash
        self.actual_hash = actual_hash
        super().__init__(
            f"replay entry {index} expects request {expected_hash[:12]}..., "
            f"got {actual_hash[:12]}..."
        )


class ReplayExhausted(ReplayError):
    def __init__(self, count: int):
        super().__init__(f"transcript exhausted after {count} entries")


class ScriptExhausted(GatewayError):
    pass


class ChatBackend(Protocol):
    model: str

    def complete(self, conversation: Conversation) -> ModelReply: ...


def request_hash(conversation: Conversation, model: str) -> str:
    """Deterministic digest of the ordered (role, content) pairs plus the
    model name. Nothing else participates."""
    payload = json.dumps(
        {
            "model": model,
            "messages": [[m.role.value, m.content] for m in conversation.messages],
        },
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# Live HTTP backend


class LiveBackend:
    """Talks to an OpenAI-compatible chat endpoint.

    Retries timeouts and 5xx responses with exponential backoff (1s, 2s, 4s,
    ... by default); anything else fails immediately. The API key comes from
    the DELF_API_KEY environment variable at call time and never appears in
    any config or record.
    """

    def __init__(
        self,
        config: BackendConfig,
        client: httpx.Client | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        if config.kind != "live":
            raise ValueError("LiveBackend requires a config with kind='live'")
        self.config = config
        self.model = config.model
        self._client = client or httpx.Client(timeout=config.timeout_seconds)
        self._sleeper = sleeper

    def complete(self, conversation: Conversation) -> ModelReply:
        api_key = os.environ.get(API_KEY_ENV_VAR)
        if not api_key:
            raise MissingCredential(
                f"live backend needs {API_KEY_ENV_VAR} set in the environment"
            )
        url = self.config.endpoint.rstrip("/") + "/chat/completions"
        body = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": m.role.value, "content": m.content} for m in conversation.messages
            ],
        }
        headers = {"Authorization": f"Bearer {api_key}"}
        started = time.monotonic()
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleeper(self.config.backoff_base_seconds * 2 ** (attempt - 1))
            try:
                response = self._client.post(
                    url, json=body, headers=headers, timeout=self.config.timeout_seconds
                )
            except httpx.TimeoutException as exc:
                last_error = exc
                continue
            except httpx.HTTPError as exc:
                raise TransportFailure(f"transport failure: {exc}") from exc
            if response.status_code >= 500:
                last_error = TransportFailure(f"server error {response.status_code}")
                continue
            if response.status_code != 200:
                raise TransportFailure(
                    f"chat endpoint returned {response.status_code}: {response.text[:200]}"
                )
            return self._parse(response, started)
        attempts = self.config.max_retries + 1
        if isinstance(last_error, httpx.TimeoutException):
            raise GatewayTimeout(f"no reply after {attempts} attempts: timed out") from last_error
        raise TransportFailure(f"no reply after {attempts} attempts: {last_error}") from last_error

    def _parse(self, response: httpx.Response, started: float) -> ModelReply:
        try:
            data = response.json()
            content = data["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, LookupError, TypeError) as exc:
            raise TransportFailure(f"malformed completion payload: {exc}") from exc
        if not isinstance(content, str):
            raise TransportFailure("completion content is not text")
        usage = data.get("usage") if isinstance(data.get("usage"), dict) else None
        return ModelReply(
            content=content,
            backend_id=f"live:{self.config.model}",
            latency_ms=(time.monotonic() - started) * 1000.0,
            usage=usage,
        )


# --------------------------------------------------------------------------
# Transcripts: record and replay


def transcript_entry(conversation: Conversation, model: str, reply: str) -> dict:
    return {
        "schema_version": TRANSCRIPT_SCHEMA_VERSION,
        "request_hash": request_hash(conversation, model),
        "model": model,
        "messages": [
            {"role": m.role.value, "content": m.content} for m in conversation.messages
        ],
        "reply": reply,
    }


def record(conversation: Conversation, model: str, reply: str, transcript_path: str | Path) -> None:
    """Append one exchange to a JSONL transcript (created if absent)."""
    entry = transcript_entry(conversation, model, reply)
    with open(transcript_path, "a", encoding="utf-8") as handle:
        handle.write(json.dumps(entry, ensure_ascii=False) + "\n")


def read_transcript(path: Path) -> list[dict]:
    entries = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ReplayError(f"{path}:{line_no}: not valid JSON: {exc}") from exc
            if "request_hash" not in entry or "reply" not in entry:
                raise ReplayError(f"{path}:{line_no}: entry lacks request_hash or reply")
            entries.append(entry)
    return entries


class ReplayBackend:
    """Serves a recorded transcript in order, one entry per request.

    Opening a transcript takes an exclusive file lock next to it; a second
    concurrent reader fails fast instead of silently splitting the stream.
    Use as a context manager or call close().

    ``cursor_path`` makes the position survive process boundaries: the index
    of the next entry is read from that file on open and rewritten after each
    reply, so a sequence of short-lived processes (one CLI invocation per
    step) consumes the transcript exactly once between resets.
    """

    def __init__(
        self,
        transcript_path: str | Path,
        model: str,
        cursor_path: str | Path | None = None,
    ):
        self.path = Path(transcript_path)
        self.model = model
        self._entries = read_transcript(self.path)
        self._cursor_path = Path(cursor_path) if cursor_path is not None else None
        self._index = self._read_cursor()
        self._lock = filelock.FileLock(str(self.path) + ".lock")
        try:
            self._lock.acquire(timeout=0)
        except filelock.Timeout:
            raise ReplayError(f"transcript already in use: {self.path}") from None

    def _read_cursor(self) -> int:
        if self._cursor_path is None or not self._cursor_path.exists():
            return 0
        text = self._cursor_path.read_text(encoding="utf-8").strip()
        try:
            index = int(text)
        except ValueError:
            raise ReplayError(f"cursor file {self._cursor_path} holds {text!r}, not an integer")
        if not 0 <= index <= len(self._entries):
            raise ReplayError(
                f"cursor file {self._cursor_path} points at entry {index}, "
                f"transcript has {len(self._entries)}"
            )
        return index

    @property
    def remaining(self) -> int:
        return len(self._entries) - self._index

    def complete(self, conversation: Conversation) -> ModelReply:
        if self._index >= len(self._entries):
            raise ReplayExhausted(len(self._entries))
        entry = self._entries[self._index]
        actual = request_hash(conversation, self.model)
        if entry["request_hash"] != actual:
            raise ReplayMismatch(self._index, entry["request_hash"], actual)
        self._index += 1
        if self._cursor_path is not None:
            self._cursor_path.write_text(f"{self._index}\n", encoding="utf-8")
        return ModelReply(entry["reply"], backend_id=f"replay:{self.model}")

    def close(self) -> None:
        if self._lock.is_locked:
            self._lock.release()

    def __enter__(self) -> "ReplayBackend":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class RecordingBackend:
    """Wraps any backend and appends each exchange to a JSONL transcript."""

    def __init__(self, inner: ChatBackend, transcript_path: str | Path, model: str):
        self.inner = inner
        self.path = Path(transcript_path)
        self.model = model

    def complete(self, conversation: Conversation) -> ModelReply:
        reply = self.inner.complete(conversation)
        record(conversation, self.model, reply.content, self.path)
        return reply


# --------------------------------------------------------------------------
# Scripted backend


@dataclass
class ScriptedBackend:
    """Feeds queued replies in order; remembers every conversation it saw."""

    replies: Iterable[str]
    model: str = "scripted"
    requests: list[Conversation] = field(default_factory=list)

    def __post_init__(self):
        self._queue = list(self.replies)

    def complete(self, conversation: Conversation) -> ModelReply:
        self.requests.append(conversation)
        if not self._queue:
            raise ScriptExhausted(f"script exhausted after {len(self.requests) - 1} replies")
        return ModelReply(self._queue.pop(0), backend_id="scripted")


def make_backend(config: BackendConfig, scripted_replies: Sequence[str] = ()) -> ChatBackend:
    """Build the backend a config describes. Scripted replies only apply to
    kind='scripted'."""
    if config.kind == "live":
        return LiveBackend(config)
    if config.kind == "replay":
        assert config.transcript_path is not None
        return ReplayBackend(config.transcript_path, config.model)
    return ScriptedBackend(list(scripted_replies), model=config.model)
