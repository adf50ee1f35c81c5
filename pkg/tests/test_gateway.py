from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from vid2dialog.errors import ConfigError, StructuredOutputError, TransportError, Vid2DialogError
from vid2dialog.gateway import (
    CachedBackend,
    ChatRequest,
    ChatResponse,
    HttpBackend,
    Message,
    MockBackend,
    catalog_version,
    complete_structured,
    render,
    request_fingerprint,
)
from vid2dialog.model import SamplingConfig


def _request(seed=0, content="TASK: make tea\nSTYLE: regular\n\nSTEP 0: boil the water", purpose="dialogue"):
    return ChatRequest(
        system=render("system"),
        messages=(Message("user", content),),
        sampling=SamplingConfig(seed=seed),
        purpose=purpose,
    )


# --- request plumbing --------------------------------------------------------


def test_request_alternation_enforced():
    with pytest.raises(ValueError):
        ChatRequest(
            system="s",
            messages=(Message("assistant", "hi"),),
            sampling=SamplingConfig(seed=0),
        )
    with pytest.raises(ValueError):
        ChatRequest(
            system="s",
            messages=(Message("user", "a"), Message("user", "b")),
            sampling=SamplingConfig(seed=0),
        )


def test_fingerprint_covers_content_and_sampling():
    base = _request()
    assert request_fingerprint(base) == request_fingerprint(_request())
    assert request_fingerprint(base) != request_fingerprint(_request(seed=1))
    assert request_fingerprint(base) != request_fingerprint(_request(content="STEP 0: other"))
    assert request_fingerprint(base) != request_fingerprint(_request(purpose="other"))


def test_prompt_catalog_versioned():
    assert catalog_version().strip()
    with pytest.raises(ConfigError):
        render("no_such_template")
    with pytest.raises(ConfigError):
        render("system", unexpected="x")


# --- mock backend ------------------------------------------------------------


def test_mock_same_request_same_bytes():
    backend = MockBackend(seed=3)
    a = backend.complete(_request())
    b = backend.complete(_request())
    assert a.text == b.text
    assert a.backend_id == "mock:3"


def test_mock_seed_changes_surface():
    a = MockBackend(seed=3).complete(_request())
    b = MockBackend(seed=4).complete(_request())
    assert a.text != b.text


def test_mock_sampling_seed_changes_surface():
    backend = MockBackend(seed=3)
    a = backend.complete(_request(seed=0))
    b = backend.complete(_request(seed=1))
    assert a.text != b.text


def test_mock_replies_depend_on_purpose():
    backend = MockBackend(seed=3)
    cue = "CUE [1.000-2.000]: stir the tea"
    steps = backend.complete(_request(content=cue, purpose="instruction_formation"))
    other = backend.complete(_request(content=cue, purpose="dialogue"))
    assert steps.text != other.text
    assert json.loads(steps.text)["steps"][0]["text"] == "stir the tea"


# --- cache -------------------------------------------------------------------


class _CountingBackend:
    backend_id = "counting:1"

    def __init__(self):
        self.calls = 0

    def complete(self, request):
        self.calls += 1
        return ChatResponse(text=f"reply {self.calls}", backend_id=self.backend_id)


def test_cache_hits_skip_inner_backend(tmp_path):
    inner = _CountingBackend()
    cached = CachedBackend(inner, tmp_path / "cache")
    first = cached.complete(_request())
    again = cached.complete(_request())
    assert inner.calls == 1
    assert first.text == again.text == "reply 1"
    assert (cached.hits, cached.misses) == (1, 1)

    cached.complete(_request(seed=9))
    assert inner.calls == 2
    assert cached.misses == 2


def test_cache_survives_restart(tmp_path):
    cache_dir = tmp_path / "cache"
    inner = _CountingBackend()
    CachedBackend(inner, cache_dir).complete(_request())
    reopened = CachedBackend(inner, cache_dir)
    assert reopened.complete(_request()).text == "reply 1"
    assert inner.calls == 1


# --- structured outputs ------------------------------------------------------

_SCHEMA = {
    "type": "object",
    "required": ["steps"],
    "properties": {"steps": {"type": "array", "minItems": 1}},
}


class _ScriptedBackend:
    """Replays a fixed list of raw replies; records every request."""

    backend_id = "scripted:1"

    def __init__(self, replies):
        self.replies = list(replies)
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        return ChatResponse(text=self.replies.pop(0), backend_id=self.backend_id)


def test_structured_accepts_fenced_json():
    backend = _ScriptedBackend(['look:\n```json\n{"steps": [1]}\n```\ndone'])
    value, attempts = complete_structured(_request(), _SCHEMA, backend)
    assert value == {"steps": [1]}
    assert attempts == 1


def test_structured_reprompts_on_invalid_then_succeeds():
    backend = _ScriptedBackend(["not json at all", '{"steps": []}', '{"steps": [1, 2]}'])
    value, attempts = complete_structured(_request(), _SCHEMA, backend)
    assert value == {"steps": [1, 2]}
    assert attempts == 3
    # the repair turn carries the previous raw text back to the model
    followup = backend.requests[1]
    assert followup.messages[-2].content == "not json at all"
    assert followup.messages[-2].role == "assistant"


def test_structured_gives_up_with_last_raw_text():
    backend = _ScriptedBackend(["junk one", "junk two"])
    with pytest.raises(StructuredOutputError) as err:
        complete_structured(_request(), _SCHEMA, backend, max_attempts=2)
    assert err.value.attempts == 2
    assert err.value.raw_text == "junk two"


def test_structured_semantic_check_reprompts():
    backend = _ScriptedBackend(['{"steps": [1]}', '{"steps": [1, 2]}'])
    value, attempts = complete_structured(
        _request(),
        _SCHEMA,
        backend,
        semantic_check=lambda v: None if len(v["steps"]) > 1 else "need at least two steps",
    )
    assert value == {"steps": [1, 2]}
    assert attempts == 2
    assert "need at least two steps" in backend.requests[1].messages[-1].content


# --- HTTP backend ------------------------------------------------------------


class _StubHandler(BaseHTTPRequestHandler):
    script: list = []  # (status, body-dict or text) consumed one per request
    seen: list = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        type(self).seen.append({"path": self.path, "body": body, "auth": self.headers.get("Authorization")})
        status, payload = type(self).script.pop(0)
        raw = json.dumps(payload).encode() if isinstance(payload, dict) else payload.encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def log_message(self, *args):
        pass


def _ok_body(text="fine", finish="stop"):
    return {
        "choices": [{"message": {"content": text}, "finish_reason": finish}],
        "usage": {"total_tokens": 5},
    }


@pytest.fixture()
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _StubHandler.script = []
    _StubHandler.seen = []
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    thread.join()


def test_http_backend_round_trip(stub_server, monkeypatch):
    monkeypatch.setenv("TEST_GATEWAY_KEY", "sekret")
    _StubHandler.script = [(200, _ok_body("hello from the stub"))]
    backend = HttpBackend(
        stub_server, "demo-model", credential_env="TEST_GATEWAY_KEY", backoff_base=0
    )
    reply = backend.complete(_request())
    assert reply.text == "hello from the stub"
    assert reply.usage == {"total_tokens": 5}
    assert not reply.truncated
    sent = _StubHandler.seen[0]
    assert sent["path"] == "/v1/chat/completions"
    assert sent["auth"] == "Bearer sekret"
    assert sent["body"]["model"] == "demo-model"
    assert sent["body"]["messages"][0]["role"] == "system"
    assert sent["body"]["seed"] == 0


def test_http_backend_retries_5xx(stub_server):
    _StubHandler.script = [(500, {"error": "boom"}), (200, _ok_body("recovered"))]
    backend = HttpBackend(stub_server, "demo-model", backoff_base=0)
    assert backend.complete(_request()).text == "recovered"
    assert len(_StubHandler.seen) == 2


def test_http_backend_exhausts_retries(stub_server):
    _StubHandler.script = [(503, {}), (503, {}), (503, {})]
    backend = HttpBackend(stub_server, "demo-model", max_attempts=3, backoff_base=0)
    with pytest.raises(TransportError) as err:
        backend.complete(_request())
    assert err.value.attempts == 3


def test_http_backend_auth_failure_is_config_error(stub_server):
    _StubHandler.script = [(401, {})]
    backend = HttpBackend(stub_server, "demo-model", backoff_base=0)
    with pytest.raises(ConfigError):
        backend.complete(_request())
    assert len(_StubHandler.seen) == 1  # no retry


def test_http_backend_other_4xx_not_retried(stub_server):
    _StubHandler.script = [(422, {"error": "bad request shape"})]
    backend = HttpBackend(stub_server, "demo-model", backoff_base=0)
    with pytest.raises(Vid2DialogError, match="422"):
        backend.complete(_request())
    assert len(_StubHandler.seen) == 1


def test_http_backend_truncation_flag(stub_server):
    _StubHandler.script = [(200, _ok_body("cut off", finish="length"))]
    backend = HttpBackend(stub_server, "demo-model", backoff_base=0)
    assert backend.complete(_request()).truncated


def test_http_backend_connection_refused():
    backend = HttpBackend(
        "http://127.0.0.1:1", "demo-model", max_attempts=2, backoff_base=0
    )
    with pytest.raises(TransportError):
        backend.complete(_request())
