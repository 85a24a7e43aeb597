"""Chat-completion gateway.

One `complete()` surface over two backend kinds: a remote chat-completions
HTTP endpoint and a deterministic scripted mock for offline runs. Shared
machinery: retry with exponential backoff, a sliding-window rate limiter,
and tolerant JSON extraction from model replies.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import requests

logger = logging.getLogger(__name__)

DEFAULT_CREDENTIAL_ENV = "CRAQAN_API_KEY"
MESSAGE_ROLES = ("system", "user", "assistant")


class GatewayError(Exception):
    """Base class for gateway failures."""


class ConfigError(GatewayError):
    """Backend configuration is invalid or a credential is missing."""


class BackendUnavailable(GatewayError):
    """Transient failures persisted past the retry budget."""


class BackendProtocolError(GatewayError):
    """The remote replied with a non-retryable error or an unusable body."""


class TransientBackendError(GatewayError):
    """Retryable failure (timeout, 5xx, rate-limit signal). Internal."""


class MockMiss(GatewayError):
    """No mock script rule matched the request's tags."""


class NoJsonFound(GatewayError):
    """The text contains no balanced JSON value of the requested kind."""


class JsonParseError(GatewayError):
    """A balanced span was found but is not strict JSON."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in MESSAGE_ROLES:
            raise ValueError(f"unknown message role {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion call.

    `persona` and `iteration` are routing tags: they identify the pipeline
    stage that issued the request so scripted mocks can replay flows
    deterministically. They are never sent to remote backends.
    """

    messages: tuple[ChatMessage, ...]
    model_name: str
    temperature: float
    max_output_tokens: int | None = None
    persona: str | None = None
    iteration: int | None = None

    def __post_init__(self):
        if not self.messages:
            raise ValueError("ChatRequest requires at least one message")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_output_tokens is not None and self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        object.__setattr__(self, "messages", tuple(self.messages))

    def prompt_text(self) -> str:
        """All message contents joined; used for hash/logging and mock matching."""
        return "\n".join(m.content for m in self.messages)


@dataclass(frozen=True)
class ChatResponse:
    content: str
    backend_id: str
    latency: float
    attempt_count: int


@dataclass(frozen=True)
class BackendConfig:
    """Declarative backend selection.

    kind="remote" needs endpoint_url; the API key is read from the
    environment variable named by credential_source, never from config.
    kind="mock" needs script_path pointing at a JSON Lines rule file.
    """

    kind: str
    endpoint_url: str | None = None
    credential_source: str = DEFAULT_CREDENTIAL_ENV
    script_path: str | Path | None = None
    retry_limit: int = 3
    requests_per_minute: int = 60
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    backoff_jitter: float = 0.1
    timeout: float = 60.0

    def __post_init__(self):
        if self.kind not in ("remote", "mock"):
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint_url:
            raise ConfigError("remote backend requires endpoint_url")
        if self.kind == "remote" and not self.credential_source:
            raise ConfigError("remote backend requires credential_source")
        if self.kind == "mock" and not self.script_path:
            raise ConfigError("mock backend requires script_path")
        if self.retry_limit < 0:
            raise ConfigError("retry_limit must be >= 0")
        if self.requests_per_minute < 1:
            raise ConfigError("requests_per_minute must be positive")


def request_hash(request: ChatRequest) -> str:
    payload = json.dumps(
        {
            "messages": [[m.role, m.content] for m in request.messages],
            "model": request.model_name,
            "temperature": request.temperature,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class RateLimiter:
    """At most `per_minute` acquisitions inside any sliding 60 s window.

    The clock and sleep hooks exist so tests can drive a virtual timeline.
    acquire() is the single synchronization point shared by concurrent
    callers of a backend.
    """

    WINDOW = 60.0

    def __init__(
        self,
        per_minute: int,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if per_minute < 1:
            raise ValueError("per_minute must be positive")
        self.per_minute = per_minute
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._stamps: deque[float] = deque()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                while self._stamps and now - self._stamps[0] >= self.WINDOW:
                    self._stamps.popleft()
                if len(self._stamps) < self.per_minute:
                    self._stamps.append(now)
                    return
                wait = self.WINDOW - (now - self._stamps[0])
            self._sleep(max(wait, 0.0))


class _RetryingBackend:
    """Retry + rate-limit wrapper; subclasses implement _send()."""

    backend_id = "base"

    def __init__(
        self,
        config: BackendConfig,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.config = config
        self._clock = clock
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._limiter = RateLimiter(config.requests_per_minute, clock=clock, sleep=sleep)
        self.call_count = 0

    def _send(self, request: ChatRequest) -> str:
        raise NotImplementedError

    def _backoff(self, attempt: int) -> float:
        cfg = self.config
        return cfg.backoff_base * cfg.backoff_factor ** (attempt - 1) + self._rng.uniform(
            0.0, cfg.backoff_jitter
        )

    def complete(self, request: ChatRequest) -> ChatResponse:
        cfg = self.config
        rid = request_hash(request)
        start = self._clock()
        last_error: Exception | None = None
        for attempt in range(1, cfg.retry_limit + 2):
            self._limiter.acquire()
            self.call_count += 1
            try:
                content = self._send(request)
            except TransientBackendError as exc:
                last_error = exc
                logger.warning(
                    "request %s attempt %d/%d failed: %s",
                    rid,
                    attempt,
                    cfg.retry_limit + 1,
                    exc,
                )
                if attempt <= cfg.retry_limit:
                    self._sleep(self._backoff(attempt))
                continue
            logger.debug("request %s completed on %s (attempt %d)", rid, self.backend_id, attempt)
            return ChatResponse(
                content=content,
                backend_id=self.backend_id,
                latency=self._clock() - start,
                attempt_count=attempt,
            )
        raise BackendUnavailable(
            f"{self.backend_id}: retries exhausted after {cfg.retry_limit + 1} attempts "
            f"(request {rid}): {last_error}"
        )


class RemoteBackend(_RetryingBackend):
    """Chat-completions-style HTTPS backend.

    The credential is resolved from the environment once, at construction,
    so a missing key fails fast instead of mid-run.
    """

    def __init__(self, config: BackendConfig, session: requests.Session | None = None, **kw):
        super().__init__(config, **kw)
        if config.kind != "remote":
            raise ConfigError("RemoteBackend requires kind='remote'")
        key = os.environ.get(config.credential_source, "")
        if not key:
            raise ConfigError(
                f"credential environment variable {config.credential_source} is not set"
            )
        self._key = key
        self._session = session or requests.Session()
        self.backend_id = f"remote:{config.endpoint_url}"

    def _send(self, request: ChatRequest) -> str:
        payload: dict[str, Any] = {
            "model": request.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
        }
        if request.max_output_tokens is not None:
            payload["max_tokens"] = request.max_output_tokens
        try:
            resp = self._session.post(
                self.config.endpoint_url,
                json=payload,
                headers={"Authorization": f"Bearer {self._key}"},
                timeout=self.config.timeout,
            )
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise TransientBackendError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise BackendProtocolError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            return body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendProtocolError(f"malformed completion body: {exc}") from exc


@dataclass
class MockRule:
    """One scripted reply.

    match_persona is mandatory; match_iteration and payload_contains narrow
    the match further. fail_times makes the rule raise a retryable error for
    its first N hits (a scripted-outage aid for retry tests).
    """

    match_persona: str
    reply: str
    match_iteration: int | None = None
    payload_contains: str | None = None
    fail_times: int = 0
    _failures_left: int = field(default=0, repr=False)

    def __post_init__(self):
        self._failures_left = self.fail_times

    def matches(self, request: ChatRequest) -> bool:
        if request.persona != self.match_persona:
            return False
        if self.match_iteration is not None and request.iteration != self.match_iteration:
            return False
        if self.payload_contains is not None and self.payload_contains not in request.prompt_text():
            return False
        return True


class MockBackend(_RetryingBackend):
    """Replays a JSON Lines rule script; first matching rule wins.

    With fail_times unused everywhere, the backend is a pure function of
    (script, request tags).
    """

    def __init__(self, rules: list[MockRule], config: BackendConfig | None = None, **kw):
        config = config or BackendConfig(kind="mock", script_path="<inline>")
        super().__init__(config, **kw)
        self.rules = rules
        self.backend_id = "mock"

    def _send(self, request: ChatRequest) -> str:
        for rule in self.rules:
            if rule.matches(request):
                if rule._failures_left > 0:
                    rule._failures_left -= 1
                    raise TransientBackendError("scripted failure")
                return rule.reply
        raise MockMiss(
            f"no rule matches persona={request.persona!r} iteration={request.iteration!r}"
        )


def _parse_rule(obj: dict, lineno: int) -> MockRule:
    if not isinstance(obj, dict) or "match" not in obj or "reply" not in obj:
        raise ConfigError(f"script line {lineno}: need 'match' and 'reply' fields")
    match = obj["match"]
    if not isinstance(match, dict) or not isinstance(match.get("persona"), str):
        raise ConfigError(f"script line {lineno}: match.persona must be a string")
    if not isinstance(obj["reply"], str):
        raise ConfigError(f"script line {lineno}: reply must be a string")
    iteration = match.get("iteration")
    if iteration is not None and not isinstance(iteration, int):
        raise ConfigError(f"script line {lineno}: match.iteration must be an integer")
    contains = match.get("payload_contains")
    if contains is not None and not isinstance(contains, str):
        raise ConfigError(f"script line {lineno}: match.payload_contains must be a string")
    fail_times = obj.get("fail_times", 0)
    if not isinstance(fail_times, int) or fail_times < 0:
        raise ConfigError(f"script line {lineno}: fail_times must be a non-negative integer")
    return MockRule(
        match_persona=match["persona"],
        reply=obj["reply"],
        match_iteration=iteration,
        payload_contains=contains,
        fail_times=fail_times,
    )


def mock_from_script(script: str | Path, config: BackendConfig | None = None, **kw) -> MockBackend:
    """Build a mock backend from a JSON Lines rule file."""
    path = Path(script)
    rules = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"script line {lineno}: invalid JSON: {exc}") from exc
        rules.append(_parse_rule(obj, lineno))
    if config is None:
        config = BackendConfig(kind="mock", script_path=path)
    return MockBackend(rules, config=config, **kw)


def build_backend(config: BackendConfig, **kw):
    """Construct the backend named by config; validates credentials up front."""
    if config.kind == "mock":
        return mock_from_script(config.script_path, config=config, **kw)
    return RemoteBackend(config, **kw)


def complete(request: ChatRequest, config: BackendConfig) -> ChatResponse:
    """One-shot convenience; pipelines should build_backend() once and reuse it."""
    return build_backend(config).complete(request)


def _scan_balanced(text: str, open_ch: str, close_ch: str) -> tuple[int, int] | None:
    """(start, end) of the first balanced top-level span, or None.

    String-aware: braces inside JSON string literals do not affect depth.
    """
    depth = 0
    start = None
    in_string = False
    escaped = False
    for i, ch in enumerate(text):
        if start is None:
            if ch == open_ch:
                start = i
                depth = 1
            continue
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == open_ch:
            depth += 1
        elif ch == close_ch:
            depth -= 1
            if depth == 0:
                return start, i + 1
    return None


def _extract(text: str, open_ch: str, close_ch: str, kind: str):
    span = _scan_balanced(text, open_ch, close_ch)
    if span is None:
        raise NoJsonFound(f"no balanced JSON {kind} in text")
    start, end = span
    try:
        return json.loads(text[start:end])
    except json.JSONDecodeError as exc:
        raise JsonParseError(f"malformed JSON {kind}: {exc.msg}", start + exc.pos) from exc


def extract_json_object(text: str) -> dict:
    """First balanced JSON object in `text`, tolerating surrounding prose and
    code fences. Parsing inside the braces is strict."""
    value = _extract(text, "{", "}", "object")
    return value


def extract_json_array(text: str) -> list:
    """First balanced JSON array in `text`; same tolerance rules as
    extract_json_object."""
    return _extract(text, "[", "]", "array")
