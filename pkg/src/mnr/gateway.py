"""Uniform access to chat-completion backends.

Two backend families share one ``complete()`` entry point: an HTTP backend
speaking the de-facto chat-completions JSON schema, and a scripted backend
that replays fixture responses for deterministic tests. Retry with
exponential backoff (base doubling, jittered) applies to transport errors
and 5xx responses; 4xx responses fail immediately. Every error carries the
request identifier.
"""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
import uuid
from dataclasses import dataclass, field

import requests

from .prompts import RenderedPrompt

__all__ = [
    "SamplingParams",
    "ModelEndpoint",
    "Completion",
    "GatewayError",
    "TransportError",
    "HttpStatusError",
    "FixtureExhausted",
    "HttpBackend",
    "ScriptedBackend",
    "ScriptedReply",
    "CallRecord",
    "complete",
    "strip_reasoning",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.6
    top_k: int = 10
    top_p: float = 0.8
    max_tokens: int = 8192
    repetition_penalty: float = 1.05

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.top_k < 1:
            raise ValueError("top_k must be a positive integer")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.repetition_penalty < 1:
            raise ValueError("repetition_penalty must be >= 1")


@dataclass(frozen=True)
class ModelEndpoint:
    """Connection settings for one served model. ``auth_env`` names the
    environment variable holding the bearer key (never the key itself)."""

    base_url: str
    model_name: str
    sampling: SamplingParams = field(default_factory=SamplingParams)
    auth_env: str = ""
    timeout: float = 120.0
    max_retries: int = 2
    send_extended_sampling: bool = True  # include top_k / repetition_penalty

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass(frozen=True)
class Completion:
    raw_text: str
    finish_reason: str  # "stop" | "length" | "error"
    latency: float
    attempt_count: int


class GatewayError(RuntimeError):
    def __init__(self, message: str, request_id: str = ""):
        super().__init__(f"[{request_id}] {message}" if request_id else message)
        self.request_id = request_id


class TransportError(GatewayError):
    """Connection/timeout-level failure; retryable."""


class HttpStatusError(GatewayError):
    def __init__(self, status: int, message: str, request_id: str = ""):
        super().__init__(f"HTTP {status}: {message}", request_id)
        self.status = status

    @property
    def retryable(self) -> bool:
        return self.status >= 500


class FixtureExhausted(GatewayError):
    """Scripted backend ran out of fixtures for a session; not retryable."""


class HttpBackend:
    """Chat-completions client over ``POST {base_url}/chat/completions``."""

    def __init__(self, endpoint: ModelEndpoint, max_in_flight: int = 4):
        self.endpoint = endpoint
        self.backoff_base = 1.0
        self._semaphore = threading.Semaphore(max_in_flight)
        self._session = requests.Session()

    @property
    def identity(self) -> str:
        return f"http:{self.endpoint.model_name}@{self.endpoint.base_url}"

    def _payload(self, prompt: RenderedPrompt) -> dict:
        sampling = self.endpoint.sampling
        messages = []
        if prompt.system:
            messages.append({"role": "system", "content": prompt.system})
        messages.append({"role": "user", "content": prompt.user})
        body = {
            "model": self.endpoint.model_name,
            "messages": messages,
            "temperature": sampling.temperature,
            "top_p": sampling.top_p,
            "max_tokens": sampling.max_tokens,
        }
        if self.endpoint.send_extended_sampling:
            body["top_k"] = sampling.top_k
            body["repetition_penalty"] = sampling.repetition_penalty
        return body

    def attempt(self, prompt: RenderedPrompt, request_id: str) -> tuple[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.endpoint.auth_env:
            key = os.environ.get(self.endpoint.auth_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        url = self.endpoint.base_url.rstrip("/") + "/chat/completions"
        with self._semaphore:
            try:
                response = self._session.post(
                    url,
                    json=self._payload(prompt),
                    headers=headers,
                    timeout=self.endpoint.timeout,
                )
            except requests.RequestException as exc:
                raise TransportError(str(exc), request_id) from exc
        if response.status_code != 200:
            raise HttpStatusError(response.status_code, response.text[:500], request_id)
        try:
            doc = response.json()
            choice = doc["choices"][0]
            text = choice["message"]["content"]
            finish = choice.get("finish_reason") or "stop"
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion payload: {exc}", request_id) from exc
        if finish not in ("stop", "length"):
            finish = "stop"
        return text, finish


@dataclass
class ScriptedReply:
    """One fixture: a response text, or an injected failure."""

    text: str = ""
    fail: str = ""  # "" | "transport" | "http_500" | "http_400"


@dataclass(frozen=True)
class CallRecord:
    session: str
    ordinal: int
    stage: str
    pair_id: str


class ScriptedBackend:
    """Deterministic fixture replay keyed by request ordinal within a session.

    ``session_key="pair"`` keys sessions by the prompt's pair_id so batches
    stay deterministic under concurrency; ``session_key="global"`` uses one
    shared queue. Every attempt is appended to ``call_log`` for call-count
    instrumentation.
    """

    def __init__(
        self,
        fixtures: dict[str, list] | list,
        name: str = "scripted",
        session_key: str = "global",
    ):
        if isinstance(fixtures, list):
            fixtures = {"": list(fixtures)}
        self._fixtures = {
            session: [r if isinstance(r, ScriptedReply) else ScriptedReply(text=str(r)) for r in replies]
            for session, replies in fixtures.items()
        }
        if session_key not in ("global", "pair"):
            raise ValueError(f"session_key must be 'global' or 'pair', got {session_key!r}")
        self.name = name
        self.session_key = session_key
        self.backoff_base = 0.0
        self.max_retries = 3
        self.timeout = 30.0
        self._cursors: dict[str, int] = {}
        self._lock = threading.Lock()
        self.call_log: list[CallRecord] = []

    @property
    def identity(self) -> str:
        return f"scripted:{self.name}"

    @classmethod
    def from_jsonl(cls, path, name: str = "scripted", session_key: str = "global") -> "ScriptedBackend":
        """Fixture file: one JSON object per line with keys ``ordinal``,
        ``response`` (or ``fail``), and optional ``session``."""
        staged: dict[str, list[tuple[int, ScriptedReply]]] = {}
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{lineno}: malformed fixture line: {exc}") from None
                if "ordinal" not in doc:
                    raise ValueError(f"{path}:{lineno}: fixture line missing 'ordinal'")
                reply = ScriptedReply(text=str(doc.get("response", "")), fail=str(doc.get("fail", "")))
                staged.setdefault(str(doc.get("session", "")), []).append((int(doc["ordinal"]), reply))
        fixtures = {
            session: [reply for _, reply in sorted(entries, key=lambda e: e[0])]
            for session, entries in staged.items()
        }
        return cls(fixtures, name=name, session_key=session_key)

    def _session_for(self, prompt: RenderedPrompt) -> str:
        if self.session_key == "pair":
            return prompt.pair_id
        return ""

    def attempt(self, prompt: RenderedPrompt, request_id: str) -> tuple[str, str]:
        session = self._session_for(prompt)
        with self._lock:
            cursor = self._cursors.get(session, 0)
            self._cursors[session] = cursor + 1
            replies = self._fixtures.get(session)
            self.call_log.append(
                CallRecord(session=session, ordinal=cursor, stage=prompt.stage, pair_id=prompt.pair_id)
            )
        if replies is None:
            raise FixtureExhausted(f"no fixtures for session {session!r}", request_id)
        if cursor >= len(replies):
            raise FixtureExhausted(
                f"session {session!r} exhausted after {len(replies)} fixtures", request_id
            )
        reply = replies[cursor]
        if reply.fail == "transport":
            raise TransportError("injected transport failure", request_id)
        if reply.fail == "http_500":
            raise HttpStatusError(500, "injected server error", request_id)
        if reply.fail == "http_400":
            raise HttpStatusError(400, "injected client error", request_id)
        return reply.text, "stop"


def _retryable(exc: GatewayError) -> bool:
    if isinstance(exc, TransportError):
        return True
    if isinstance(exc, HttpStatusError):
        return exc.retryable
    return False


def _max_retries(backend) -> int:
    if isinstance(backend, HttpBackend):
        return backend.endpoint.max_retries
    return backend.max_retries


def complete(backend, prompt: RenderedPrompt, rng: random.Random | None = None) -> Completion:
    """One logical model call: retries with jittered exponential backoff on
    retryable failures, surfaces finish_reason, and reports the wall-clock
    latency of the final attempt.

    Scripted backends report latency 0.0 so fixture-driven artifacts are
    byte-identical across runs.
    """
    if not prompt.user.strip():
        raise GatewayError("prompt is empty")
    rng = rng or random
    request_id = f"{prompt.stage}:{prompt.pair_id or 'adhoc'}:{uuid.uuid4().hex[:8]}"
    retries = _max_retries(backend)
    scripted = isinstance(backend, ScriptedBackend)
    attempt_count = 0
    while True:
        attempt_count += 1
        start = time.perf_counter()
        try:
            text, finish = backend.attempt(prompt, request_id)
        except GatewayError as exc:
            if not _retryable(exc) or attempt_count > retries:
                raise
            delay = backend.backoff_base * (2 ** (attempt_count - 1)) * rng.uniform(0.5, 1.5)
            log.warning("attempt %d failed (%s); retrying in %.2fs", attempt_count, exc, delay)
            if delay > 0:
                time.sleep(delay)
            continue
        latency = 0.0 if scripted else time.perf_counter() - start
        return Completion(
            raw_text=text, finish_reason=finish, latency=latency, attempt_count=attempt_count
        )


# --- reasoning-span removal --------------------------------------------------

_THINK_OPEN = "<think>"
_THINK_CLOSE = "</think>"


def strip_reasoning(text: str) -> str:
    """Remove well-formed (possibly nested) ``<think>...</think>`` spans.

    Text with no spans passes through unchanged; an unclosed opening tag
    drops everything from the tag to the end (logged). Orphan closing tags
    are left as plain text, which keeps the operation idempotent.
    """
    if _THINK_OPEN not in text:
        return text
    out: list[str] = []
    depth = 0
    i = 0
    n = len(text)
    while i < n:
        if text.startswith(_THINK_OPEN, i):
            depth += 1
            i += len(_THINK_OPEN)
        elif text.startswith(_THINK_CLOSE, i) and depth > 0:
            depth -= 1
            i += len(_THINK_CLOSE)
        else:
            if depth == 0:
                out.append(text[i])
            i += 1
    if depth > 0:
        log.warning("strip_reasoning: unclosed %s tag; dropped trailing span", _THINK_OPEN)
    return "".join(out)
