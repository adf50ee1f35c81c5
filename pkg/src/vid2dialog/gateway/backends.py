"""Chat backends: a remote HTTP service and a transparent on-disk cache.

Every backend exposes ``backend_id`` (a stable string naming the model or
service) and ``complete(request) -> ChatResponse``. Retries apply only to
transport failures and 5xx statuses; 4xx responses are never retried because
resending the same bad request cannot succeed.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import asdict
from pathlib import Path
from typing import Protocol

import requests

from ..errors import ConfigError, TransportError, Vid2DialogError
from .types import ChatRequest, ChatResponse, request_fingerprint


class Backend(Protocol):
    backend_id: str

    def complete(self, request: ChatRequest) -> ChatResponse: ...


class HttpBackend:
    """OpenAI-style ``/v1/chat/completions`` client.

    The credential is read from the environment (``credential_env``) at call
    time, never stored or logged. ``backoff_base`` doubles per attempt; pass 0
    in tests to avoid sleeping.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        credential_env: str = "VID2DIALOG_API_KEY",
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        timeout: float = 60.0,
        session: requests.Session | None = None,
    ) -> None:
        if max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.credential_env = credential_env
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.timeout = timeout
        self._session = session or requests.Session()
        self.backend_id = f"http:{model}"

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        credential = os.environ.get(self.credential_env, "")
        if credential:
            headers["Authorization"] = f"Bearer {credential}"
        return headers

    def _payload(self, request: ChatRequest) -> dict:
        messages: list[dict] = [{"role": "system", "content": request.system}]
        for m in request.messages:
            entry = {"role": m.role, "content": m.content}
            if m.media is not None:
                entry["media"] = m.media
            messages.append(entry)
        return {
            "model": self.model,
            "messages": messages,
            "temperature": request.sampling.temperature,
            "top_p": request.sampling.top_p,
            "seed": request.sampling.seed,
            "max_tokens": request.max_tokens,
        }

    def complete(self, request: ChatRequest) -> ChatResponse:
        url = f"{self.endpoint}/v1/chat/completions"
        payload = self._payload(request)
        last_problem = "no attempt made"
        for attempt in range(1, self.max_attempts + 1):
            try:
                reply = self._session.post(
                    url, json=payload, headers=self._headers(), timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_problem = f"transport failure: {exc}"
            else:
                if reply.status_code in (401, 403):
                    raise ConfigError(
                        f"backend rejected the credential from ${self.credential_env} "
                        f"(HTTP {reply.status_code})"
                    )
                if 400 <= reply.status_code < 500:
                    raise Vid2DialogError(
                        f"backend rejected the request (HTTP {reply.status_code}): "
                        f"{reply.text[:200]}"
                    )
                if reply.status_code >= 500:
                    last_problem = f"server error HTTP {reply.status_code}"
                else:
                    return self._parse(reply)
            if attempt < self.max_attempts and self.backoff_base > 0:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
        raise TransportError(last_problem, attempts=self.max_attempts)

    def _parse(self, reply: requests.Response) -> ChatResponse:
        try:
            body = reply.json()
            choice = body["choices"][0]
            text = choice["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed backend reply: {exc}", attempts=1) from exc
        return ChatResponse(
            text=text,
            backend_id=self.backend_id,
            usage=body.get("usage") or {},
            truncated=choice.get("finish_reason") == "length",
        )


class CachedBackend:
    """Content-addressed response cache wrapped around another backend.

    Keys combine the inner backend id with the request fingerprint, so two
    models never share entries. Writes are atomic (temp file + rename) and
    guarded by a lock so concurrent evaluation workers can share one cache.
    """

    def __init__(self, inner: Backend, cache_dir: str | Path) -> None:
        self.inner = inner
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.backend_id = inner.backend_id
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def _path(self, request: ChatRequest) -> Path:
        key = hashlib.sha256(
            f"{self.inner.backend_id}\x1e{request_fingerprint(request)}".encode()
        ).hexdigest()
        return self.cache_dir / f"{key}.json"

    def complete(self, request: ChatRequest) -> ChatResponse:
        path = self._path(request)
        with self._lock:
            if path.exists():
                record = json.loads(path.read_text("utf-8"))
                self.hits += 1
                return ChatResponse(**record)
        response = self.inner.complete(request)
        record = asdict(response)
        with self._lock:
            self.misses += 1
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(record, sort_keys=True, ensure_ascii=False), "utf-8")
            os.replace(tmp, path)
        return response
