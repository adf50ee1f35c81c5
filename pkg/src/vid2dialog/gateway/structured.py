"""Structured (JSON) completions with schema validation and bounded repair.

``complete_structured`` asks a backend for JSON, pulls the first JSON block
out of the reply, validates it against a schema, and optionally against a
caller-supplied semantic check. On failure it re-prompts with a description
of the problem, up to ``max_attempts`` total calls, then raises
``StructuredOutputError`` carrying the last raw reply.
"""

from __future__ import annotations

import json
from typing import Any, Callable

import jsonschema

from ..errors import StructuredOutputError
from .prompts import render
from .types import ChatRequest


def extract_json_block(text: str) -> str | None:
    """Return the first JSON object/array in *text*, or None.

    Prefers a fenced ``` block when present, otherwise scans for the first
    balanced {...} or [...] outside string literals.
    """
    fence = text.find("```")
    if fence != -1:
        start = text.find("\n", fence)
        end = text.find("```", fence + 3)
        if start != -1 and end > start:
            inner = text[start + 1 : end].strip()
            if inner:
                text = inner
    opens = {"{": "}", "[": "]"}
    for i, ch in enumerate(text):
        if ch not in opens:
            continue
        depth = 0
        in_string = False
        escaped = False
        for j in range(i, len(text)):
            c = text[j]
            if in_string:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_string = False
                continue
            if c == '"':
                in_string = True
            elif c in opens:
                depth += 1
            elif c in ("}", "]"):
                depth -= 1
                if depth == 0:
                    return text[i : j + 1]
        break
    return None


def complete_structured(
    request: ChatRequest,
    schema: dict,
    backend,
    *,
    max_attempts: int = 3,
    semantic_check: Callable[[Any], str | None] | None = None,
) -> tuple[Any, int]:
    """Return ``(parsed_value, attempts_used)`` or raise StructuredOutputError."""
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    current = request
    raw = ""
    problem = "no reply"
    for attempt in range(1, max_attempts + 1):
        raw = backend.complete(current).text
        block = extract_json_block(raw)
        if block is None:
            problem = "the reply contained no JSON object"
        else:
            try:
                value = json.loads(block)
            except json.JSONDecodeError as exc:
                problem = f"the JSON did not parse ({exc.msg} at position {exc.pos})"
            else:
                try:
                    jsonschema.validate(value, schema)
                except jsonschema.ValidationError as exc:
                    problem = f"the JSON had the wrong shape ({exc.message})"
                else:
                    note = semantic_check(value) if semantic_check else None
                    if note is None:
                        return value, attempt
                    problem = note
        if attempt < max_attempts:
            current = current.with_exchange(raw, render("repair", problem=problem))
    raise StructuredOutputError(
        f"backend never produced usable JSON after {max_attempts} attempts "
        f"(last problem: {problem})",
        raw_text=raw,
        attempts=max_attempts,
    )
