"""Gateway tests: mock scripting, retry/backoff, rate limiting, JSON extraction."""

from __future__ import annotations

import json
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from craqan.gateway import (
    BackendConfig,
    BackendProtocolError,
    BackendUnavailable,
    ChatMessage,
    ChatRequest,
    ConfigError,
    JsonParseError,
    MockBackend,
    MockMiss,
    MockRule,
    NoJsonFound,
    RateLimiter,
    RemoteBackend,
    extract_json_array,
    extract_json_object,
    mock_from_script,
)


def req(content="hi", persona=None, iteration=None, temperature=0.7):
    return ChatRequest(
        messages=(ChatMessage("user", content),),
        model_name="test-model",
        temperature=temperature,
        persona=persona,
        iteration=iteration,
    )


def no_sleep(_):
    pass


# ---------------------------------------------------------------- request types


def test_request_rejects_empty_messages():
    with pytest.raises(ValueError):
        ChatRequest(messages=(), model_name="m", temperature=0.5)


@pytest.mark.parametrize("temp", [-0.1, 2.01, 5.0])
def test_request_rejects_out_of_range_temperature(temp):
    with pytest.raises(ValueError):
        req(temperature=temp)


def test_message_rejects_unknown_role():
    with pytest.raises(ValueError):
        ChatMessage("narrator", "x")


def test_config_validation():
    with pytest.raises(ConfigError):
        BackendConfig(kind="remote")  # no endpoint
    with pytest.raises(ConfigError):
        BackendConfig(kind="mock")  # no script
    with pytest.raises(ConfigError):
        BackendConfig(kind="carrier-pigeon", endpoint_url="x")
    with pytest.raises(ConfigError):
        BackendConfig(kind="mock", script_path="s", retry_limit=-1)


# ---------------------------------------------------------------- mock backend


def test_mock_single_rule_replies(tmp_path):
    script = tmp_path / "s.jsonl"
    script.write_text('{"match": {"persona": "generator"}, "reply": "ok"}\n')
    backend = mock_from_script(script)
    resp = backend.complete(req(persona="generator"))
    assert resp.content == "ok"
    assert resp.attempt_count == 1
    assert resp.backend_id == "mock"


def test_mock_first_matching_rule_wins():
    rules = [
        MockRule(match_persona="generator", reply="first"),
        MockRule(match_persona="generator", reply="second"),
    ]
    backend = MockBackend(rules)
    assert backend.complete(req(persona="generator")).content == "first"


def test_mock_iteration_match():
    rules = [
        MockRule(match_persona="generator", match_iteration=2, reply="revised"),
        MockRule(match_persona="generator", reply="initial"),
    ]
    backend = MockBackend(rules)
    assert backend.complete(req(persona="generator", iteration=1)).content == "initial"
    assert backend.complete(req(persona="generator", iteration=2)).content == "revised"


def test_mock_payload_contains_match():
    rules = [
        MockRule(match_persona="splitter", payload_contains="Einstein", reply='["a"]'),
        MockRule(match_persona="splitter", reply='["b"]'),
    ]
    backend = MockBackend(rules)
    assert backend.complete(req("Albert Einstein was", persona="splitter")).content == '["a"]'
    assert backend.complete(req("something else", persona="splitter")).content == '["b"]'


def test_mock_unknown_persona_is_miss():
    backend = MockBackend([MockRule(match_persona="generator", reply="ok")])
    with pytest.raises(MockMiss):
        backend.complete(req(persona="interloper"))


def test_mock_is_deterministic():
    backend = MockBackend([MockRule(match_persona="g", reply="same")])
    replies = {backend.complete(req(persona="g")).content for _ in range(5)}
    assert replies == {"same"}


def test_mock_scripted_failures_consume_attempts(tmp_path):
    script = tmp_path / "s.jsonl"
    script.write_text(
        '{"match": {"persona": "g"}, "reply": "eventually", "fail_times": 2}\n'
    )
    cfg = BackendConfig(kind="mock", script_path=script, retry_limit=2)
    backend = mock_from_script(script, config=cfg, sleep=no_sleep)
    resp = backend.complete(req(persona="g"))
    assert resp.content == "eventually"
    assert resp.attempt_count == 3


def test_mock_failures_exhaust_retries(tmp_path):
    script = tmp_path / "s.jsonl"
    script.write_text('{"match": {"persona": "g"}, "reply": "never", "fail_times": 5}\n')
    cfg = BackendConfig(kind="mock", script_path=script, retry_limit=1)
    backend = mock_from_script(script, config=cfg, sleep=no_sleep)
    with pytest.raises(BackendUnavailable):
        backend.complete(req(persona="g"))


def test_script_parse_errors(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"reply": "no match field"}\n')
    with pytest.raises(ConfigError):
        mock_from_script(bad)
    bad.write_text("not json\n")
    with pytest.raises(ConfigError):
        mock_from_script(bad)


# ---------------------------------------------------------------- remote backend


class FakeResponse:
    def __init__(self, status_code, body=None, text=""):
        self.status_code = status_code
        self._body = body
        self.text = text

    def json(self):
        if self._body is None:
            raise ValueError("no body")
        return self._body


class FakeSession:
    """Stands in for requests.Session; pops canned responses in order."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers})
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def completion_body(text):
    return {"choices": [{"message": {"content": text}}]}


def remote_cfg(**kw):
    kw.setdefault("retry_limit", 2)
    return BackendConfig(kind="remote", endpoint_url="https://api.test/v1/chat", **kw)


def test_remote_missing_credential_fails_at_construction(monkeypatch):
    monkeypatch.delenv("CRAQAN_API_KEY", raising=False)
    with pytest.raises(ConfigError):
        RemoteBackend(remote_cfg())


def test_remote_success_and_wire_shape(monkeypatch):
    monkeypatch.setenv("CRAQAN_API_KEY", "sk-test")
    session = FakeSession([FakeResponse(200, completion_body("hello"))])
    backend = RemoteBackend(remote_cfg(), session=session, sleep=no_sleep)
    resp = backend.complete(req("ping", temperature=0.3))
    assert resp.content == "hello"
    sent = session.calls[0]
    assert sent["json"]["model"] == "test-model"
    assert sent["json"]["temperature"] == 0.3
    assert sent["json"]["messages"] == [{"role": "user", "content": "ping"}]
    assert sent["headers"]["Authorization"] == "Bearer sk-test"


def test_remote_retries_transient_then_succeeds(monkeypatch):
    monkeypatch.setenv("CRAQAN_API_KEY", "sk-test")
    session = FakeSession(
        [FakeResponse(500), FakeResponse(429), FakeResponse(200, completion_body("ok"))]
    )
    backend = RemoteBackend(remote_cfg(), session=session, sleep=no_sleep)
    resp = backend.complete(req())
    assert resp.content == "ok"
    assert resp.attempt_count == 3


def test_remote_exhaustion_raises_backend_unavailable(monkeypatch):
    monkeypatch.setenv("CRAQAN_API_KEY", "sk-test")
    session = FakeSession([FakeResponse(503)] * 3)
    backend = RemoteBackend(remote_cfg(), session=session, sleep=no_sleep)
    with pytest.raises(BackendUnavailable):
        backend.complete(req())


def test_remote_permanent_error_not_retried(monkeypatch):
    monkeypatch.setenv("CRAQAN_API_KEY", "sk-test")
    session = FakeSession([FakeResponse(400, text="bad request")])
    backend = RemoteBackend(remote_cfg(), session=session, sleep=no_sleep)
    with pytest.raises(BackendProtocolError):
        backend.complete(req())
    assert len(session.calls) == 1


# ---------------------------------------------------------------- rate limiter


class VirtualClock:
    def __init__(self):
        self.now = 0.0
        self.acquisitions = []

    def clock(self):
        return self.now

    def sleep(self, seconds):
        self.now += max(seconds, 0.001)


def test_rate_limiter_never_exceeds_window():
    vc = VirtualClock()
    limiter = RateLimiter(5, clock=vc.clock, sleep=vc.sleep)
    stamps = []
    for _ in range(23):
        limiter.acquire()
        stamps.append(vc.now)
        vc.now += 0.5  # caller does some work between requests
    for i, t in enumerate(stamps):
        in_window = [s for s in stamps if t - 60.0 < s <= t]
        assert len(in_window) <= 5, f"window ending at acquisition {i} holds {len(in_window)}"


def test_rate_limiter_blocks_until_slot_frees():
    vc = VirtualClock()
    limiter = RateLimiter(2, clock=vc.clock, sleep=vc.sleep)
    limiter.acquire()
    limiter.acquire()
    before = vc.now
    limiter.acquire()  # must wait ~60s for the first stamp to expire
    assert vc.now - before >= 59.9


# ---------------------------------------------------------------- JSON extraction


def test_extract_bare_object():
    text = '{"question":"Q","answer":"A","required_sentence_indices":[0,2]}'
    assert extract_json_object(text) == {
        "question": "Q",
        "answer": "A",
        "required_sentence_indices": [0, 2],
    }


def test_extract_from_code_fence():
    text = 'Sure! Here is my response:\n```json\n{"reason":"ok","is_quality":true}\n```'
    assert extract_json_object(text) == {"reason": "ok", "is_quality": True}


def test_extract_no_object():
    with pytest.raises(NoJsonFound):
        extract_json_object("I cannot comply.")


def test_extract_unclosed_object():
    with pytest.raises(NoJsonFound):
        extract_json_object('oops {"a": 1')


def test_extract_malformed_object_reports_position():
    with pytest.raises(JsonParseError) as exc_info:
        extract_json_object("prefix {not: valid} suffix")
    assert exc_info.value.position >= 7


def test_extract_first_of_two():
    text = '{"a": 1} and later {"b": 2}'
    assert extract_json_object(text) == {"a": 1}


def test_extract_handles_braces_inside_strings():
    text = 'noise {"a": "curly } brace {", "b": 2} tail'
    assert extract_json_object(text) == {"a": "curly } brace {", "b": 2}


def test_extract_handles_escaped_quotes():
    text = '{"a": "say \\"hi\\" {"}'
    assert extract_json_object(text) == {"a": 'say "hi" {'}


def test_extract_array():
    text = "the pieces:\n```\n[\"one\", \"two\"]\n```"
    assert extract_json_array(text) == ["one", "two"]


def test_extract_array_absent():
    with pytest.raises(NoJsonFound):
        extract_json_array("no list here")


json_values = st.recursive(
    st.none()
    | st.booleans()
    | st.integers(min_value=-(10**9), max_value=10**9)
    | st.floats(allow_nan=False, allow_infinity=False, width=32)
    | st.text(max_size=20),
    lambda children: st.lists(children, max_size=4)
    | st.dictionaries(st.text(max_size=8), children, max_size=4),
    max_leaves=12,
)
prose_alphabet = string.ascii_letters + string.digits + " .,;:!?\"'()\n"


@settings(max_examples=120, deadline=None)
@given(
    value=st.dictionaries(st.text(max_size=8), json_values, max_size=5),
    prefix=st.text(alphabet=prose_alphabet, max_size=60),
    suffix=st.text(alphabet=prose_alphabet, max_size=60),
    fenced=st.booleans(),
)
def test_extract_round_trips_through_prose(value, prefix, suffix, fenced):
    serialized = json.dumps(value, ensure_ascii=False)
    body = f"```json\n{serialized}\n```" if fenced else serialized
    text = f"{prefix}{body}{suffix}"
    assert extract_json_object(text) == value
