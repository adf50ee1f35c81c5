"""Uniform chat-completion interface with remote and deterministic-mock backends."""

from .backends import CachedBackend, HttpBackend
from .mock import MockBackend
from .prompts import catalog_version, load_template, render
from .structured import complete_structured, extract_json_block
from .types import ChatRequest, ChatResponse, Message, request_fingerprint

__all__ = [
    "CachedBackend",
    "ChatRequest",
    "ChatResponse",
    "HttpBackend",
    "Message",
    "MockBackend",
    "catalog_version",
    "complete_structured",
    "extract_json_block",
    "load_template",
    "render",
    "request_fingerprint",
]
