"""Assemble assistant-evaluation prompts from dataset sessions.

Two configurations: ``history_only`` gives the model just the conversation so
far; ``history_plus_steps`` additionally embeds the full numbered instruction
list in the system prompt. The turn's clip is referenced as a media locator
on the current user message; text-only backends ignore it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..gateway import ChatRequest, Message, render
from ..model import SamplingConfig, Session
from ..times import fmt_seconds

PROMPT_MODES = ("history_only", "history_plus_steps")


@dataclass(frozen=True)
class PromptConfig:
    mode: str
    # Candidate decoding is greedy by default so evaluation runs reproduce.
    sampling: SamplingConfig = field(
        default_factory=lambda: SamplingConfig(seed=0, temperature=0.0, top_p=1.0)
    )
    max_tokens: int = 256

    def __post_init__(self) -> None:
        if self.mode not in PROMPT_MODES:
            raise ValueError(f"prompt mode must be one of {PROMPT_MODES}, got {self.mode!r}")


def numbered_steps(session: Session) -> str:
    return "\n".join(f"{s.index + 1}. {s.text}" for s in session.instructions.steps)


def clip_locator(session: Session, turn_index: int) -> str | None:
    span = session.turns[turn_index].video_span
    if span is None:
        return None
    return f"{session.source}#t={fmt_seconds(span[0])},{fmt_seconds(span[1])}"


def build_prompt(session: Session, turn_index: int, config: PromptConfig) -> ChatRequest:
    if not 0 <= turn_index < len(session.turns):
        raise ValueError(
            f"turn_index {turn_index} out of range for session {session.id!r} "
            f"with {len(session.turns)} turns"
        )
    task = session.instructions.task
    if config.mode == "history_plus_steps":
        system = render("assist_system_steps", task=task, steps=numbered_steps(session))
    else:
        system = render("assist_system", task=task)
    messages: list[Message] = []
    for turn in session.turns[:turn_index]:
        messages.append(Message("user", turn.user_utterance))
        messages.append(Message("assistant", turn.expert_response))
    current = session.turns[turn_index]
    messages.append(
        Message("user", current.user_utterance, media=clip_locator(session, turn_index))
    )
    return ChatRequest(
        system=system,
        messages=tuple(messages),
        sampling=config.sampling,
        max_tokens=config.max_tokens,
        purpose="assist",
    )
