"""Deterministic assistant backends for harness testing.

``EchoStepsBackend`` reads the numbered instruction list out of the system
prompt and answers with the step matching the current turn, so it only works
well under the history_plus_steps prompt mode. ``NoKnowledgeBackend`` answers
with generic filler that deliberately shares almost no vocabulary with step
instructions. Together they make the knowledge-in-prompt ordering property
testable without hosted models.
"""

from __future__ import annotations

import hashlib
import re

from ..gateway import ChatRequest, ChatResponse

_NUMBERED_RE = re.compile(r"^\s*(\d+)\.\s+(.*)$")


class EchoStepsBackend:
    backend_id = "assist-echo-steps"

    def complete(self, request: ChatRequest) -> ChatResponse:
        steps = [
            m.group(2).strip()
            for m in (_NUMBERED_RE.match(line) for line in request.system.splitlines())
            if m
        ]
        turn = sum(1 for m in request.messages if m.role == "user") - 1
        if not steps:
            text = "i have no instruction list to follow here."
        else:
            step = steps[min(turn, len(steps) - 1)]
            text = f"now {step}."
        return ChatResponse(text=text, backend_id=self.backend_id)


class NoKnowledgeBackend:
    backend_id = "assist-no-knowledge"

    _REPLIES = (
        "hmm, honestly just do whatever feels natural as your move here.",
        "keep going however you see fit, it will probably work out.",
        "try something reasonable, you know this better than i do.",
    )

    def complete(self, request: ChatRequest) -> ChatResponse:
        blob = "\x1e".join(f"{m.role}:{m.content}" for m in request.messages)
        digest = hashlib.sha256(blob.encode("utf-8")).digest()
        text = self._REPLIES[digest[0] % len(self._REPLIES)]
        return ChatResponse(text=text, backend_id=self.backend_id)
