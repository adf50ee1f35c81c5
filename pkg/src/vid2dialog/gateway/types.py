"""Request and response records shared by every chat backend.

A request is a pure value: the same ``ChatRequest`` always has the same
fingerprint, which is what the cache layer and the deterministic mock key on.
``purpose`` tags which pipeline stage built the request ("instruction_formation",
"dialogue", "judge", "assist", ...) and is deliberately part of the content.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from ..model import SamplingConfig

ROLES = ("user", "assistant")


@dataclass(frozen=True)
class Message:
    role: str
    content: str
    # Optional clip locator ("uri#t=start,end"); text-only backends ignore it.
    media: str | None = None

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown message role {self.role!r}")
        if not isinstance(self.content, str):
            raise TypeError("message content must be a string")


@dataclass(frozen=True)
class ChatRequest:
    system: str
    messages: tuple[Message, ...]
    sampling: SamplingConfig
    max_tokens: int = 1024
    purpose: str = ""

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if self.messages[0].role != "user":
            raise ValueError("the first message must come from the user")
        for before, after in zip(self.messages, self.messages[1:]):
            if before.role == after.role:
                raise ValueError("message roles must alternate user/assistant")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be at least 1")

    def with_exchange(self, assistant_text: str, user_text: str) -> "ChatRequest":
        """Extend the conversation by one assistant reply plus one user follow-up."""
        extra = (Message("assistant", assistant_text), Message("user", user_text))
        return ChatRequest(
            system=self.system,
            messages=self.messages + extra,
            sampling=self.sampling,
            max_tokens=self.max_tokens,
            purpose=self.purpose,
        )


@dataclass(frozen=True)
class ChatResponse:
    text: str
    backend_id: str
    usage: dict = field(default_factory=dict)
    truncated: bool = False


def request_fingerprint(request: ChatRequest) -> str:
    """Stable sha256 over the full request content, sampling settings included."""
    payload = {
        "system": request.system,
        "messages": [asdict(m) for m in request.messages],
        "sampling": {
            "seed": request.sampling.seed,
            "temperature": request.sampling.temperature,
            "top_p": request.sampling.top_p,
        },
        "max_tokens": request.max_tokens,
        "purpose": request.purpose,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
