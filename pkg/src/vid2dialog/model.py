"""Shared domain types for sources, instructions, sessions and their serialization.

All types are immutable values: construction validates the cheap local
invariants, :func:`validate_session` checks the cross-cutting ones
(step/turn bijection, span ordering, error coverage, style constraints)
that only hold for fully assembled sessions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import Decimal

from .times import fmt_seconds, seconds

DOMAINS = ("cooking", "repair", "planting", "other")
SOURCE_KINDS = ("narrated", "annotated")
ERROR_KINDS = ("omission", "addition", "modification", "slip", "correction")
# Only these error kinds drive corrective expert turns during generation.
GENERATIVE_ERROR_KINDS = ("modification", "correction")
SPEECH_STYLES = ("concise", "regular")
ACTION_CATEGORIES = ("following_steps", "making_errors")
SPLITS = ("train", "val", "test")

Span = tuple[Decimal, Decimal]


def _check_enum(name: str, value: str, allowed: tuple[str, ...]) -> None:
    if value not in allowed:
        raise ValueError(f"{name} must be one of {allowed}, got {value!r}")


def make_span(start, end) -> Span:
    start, end = seconds(start), seconds(end)
    if start < 0:
        raise ValueError(f"span start must be >= 0, got {start}")
    if end <= start:
        raise ValueError(f"span end must be > start, got ({start}, {end})")
    return (start, end)


@dataclass(frozen=True)
class SourceVideo:
    """Reference to an instructional video; frames are never decoded here."""

    id: str
    task: str
    domain: str
    duration: Decimal
    kind: str
    uri: str
    egocentric: bool
    frame_count: int | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("source id must be non-empty")
        _check_enum("domain", self.domain, DOMAINS)
        _check_enum("kind", self.kind, SOURCE_KINDS)
        object.__setattr__(self, "duration", seconds(self.duration))
        if self.duration <= 0:
            raise ValueError(f"duration must be > 0, got {self.duration}")
        if self.frame_count is not None and self.frame_count < 1:
            raise ValueError(f"frame_count must be >= 1, got {self.frame_count}")


@dataclass(frozen=True)
class SubtitleSegment:
    """One narration cue with its time bounds."""

    text: str
    t_start: Decimal
    t_end: Decimal

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("subtitle text must be non-empty")
        object.__setattr__(self, "t_start", seconds(self.t_start))
        object.__setattr__(self, "t_end", seconds(self.t_end))
        if self.t_start < 0:
            raise ValueError(f"t_start must be >= 0, got {self.t_start}")
        if self.t_end <= self.t_start:
            raise ValueError(
                f"t_end must be > t_start, got ({self.t_start}, {self.t_end})"
            )


@dataclass(frozen=True)
class SubtitleTrack:
    """Ordered narration cues. Construction sorts by start time (stable)."""

    segments: tuple[SubtitleSegment, ...]

    def __post_init__(self):
        segs = tuple(sorted(self.segments, key=lambda s: s.t_start))
        if not segs:
            raise ValueError("subtitle track must contain at least one segment")
        object.__setattr__(self, "segments", segs)

    @property
    def t_start(self) -> Decimal:
        return self.segments[0].t_start

    @property
    def t_end(self) -> Decimal:
        return max(s.t_end for s in self.segments)


@dataclass(frozen=True)
class ErrorLabel:
    """Execution-error annotation; corrective_action is the expert's fix."""

    kind: str
    corrective_action: str | None = None

    def __post_init__(self):
        _check_enum("error kind", self.kind, ERROR_KINDS)
        if self.corrective_action is not None and not self.corrective_action.strip():
            raise ValueError("corrective_action, when present, must be non-empty")


@dataclass(frozen=True)
class ActionAnnotation:
    """Timestamped fine-grained action label, optionally error-marked."""

    description: str
    t_start: Decimal
    t_end: Decimal
    error: ErrorLabel | None = None

    def __post_init__(self):
        if not self.description.strip():
            raise ValueError("annotation description must be non-empty")
        object.__setattr__(self, "t_start", seconds(self.t_start))
        object.__setattr__(self, "t_end", seconds(self.t_end))
        if self.t_start < 0:
            raise ValueError(f"t_start must be >= 0, got {self.t_start}")
        if self.t_end <= self.t_start:
            raise ValueError(
                f"t_end must be > t_start, got ({self.t_start}, {self.t_end})"
            )


@dataclass(frozen=True)
class AtomicStep:
    """One independently executable instruction with provenance spans.

    ``inferred`` marks steps the model added beyond what the narration
    states; ``nuance`` keeps the narration detail a clarification question
    may later be built from.
    """

    index: int
    text: str
    source_spans: tuple[Span, ...] = ()
    error_marked: bool = False
    error: ErrorLabel | None = None
    inferred: bool = False
    nuance: str | None = None

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("step index must be >= 0")
        if not self.text.strip():
            raise ValueError("step text must be non-empty")
        object.__setattr__(
            self, "source_spans", tuple(make_span(a, b) for a, b in self.source_spans)
        )
        if self.error_marked:
            if self.error is None or self.error.kind not in GENERATIVE_ERROR_KINDS:
                raise ValueError(
                    "error_marked steps need an error label of kind "
                    f"{GENERATIVE_ERROR_KINDS}"
                )
            if not self.error.corrective_action:
                raise ValueError("error_marked steps need a corrective_action")


@dataclass(frozen=True)
class InstructionList:
    """Canonical ordered atomic steps for one task."""

    task: str
    steps: tuple[AtomicStep, ...]

    def __post_init__(self):
        if not self.task.strip():
            raise ValueError("task must be non-empty")
        steps = tuple(self.steps)
        if not steps:
            raise ValueError("instruction list must contain at least one step")
        for i, step in enumerate(steps):
            if step.index != i:
                raise ValueError(
                    f"step indices must be contiguous from 0; position {i} has index {step.index}"
                )
        object.__setattr__(self, "steps", steps)

    @property
    def error_marked_count(self) -> int:
        return sum(1 for s in self.steps if s.error_marked)


@dataclass(frozen=True)
class DialogueTurn:
    """One user utterance plus the expert response, tied to a step and a clip."""

    index: int
    user_utterance: str
    expert_response: str
    step_index: int
    is_error_turn: bool = False
    video_span: Span | None = None

    def __post_init__(self):
        if self.index < 0 or self.step_index < 0:
            raise ValueError("turn and step indices must be >= 0")
        if not self.user_utterance.strip():
            raise ValueError("user_utterance must be non-empty")
        if not self.expert_response.strip():
            raise ValueError("expert_response must be non-empty")
        if self.video_span is not None:
            object.__setattr__(self, "video_span", make_span(*self.video_span))


@dataclass(frozen=True)
class Session:
    """One generated conversation over a source video.

    Spans may be unfilled between dialogue generation and localization;
    :func:`validate_session` checks the full set of invariants once a
    session is meant to be final.
    """

    id: str
    source: str
    instructions: InstructionList
    turns: tuple[DialogueTurn, ...]
    speech_style: str
    action_category: str
    split: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("session id must be non-empty")
        _check_enum("speech_style", self.speech_style, SPEECH_STYLES)
        _check_enum("action_category", self.action_category, ACTION_CATEGORIES)
        if self.split is not None:
            _check_enum("split", self.split, SPLITS)
        if self.speech_style == "concise" and self.action_category != "following_steps":
            raise ValueError("concise sessions must have action_category=following_steps")
        object.__setattr__(self, "turns", tuple(self.turns))

    @property
    def user_category(self) -> str:
        """Stratification key: speech style crossed with action category."""
        if self.speech_style == "concise":
            return "concise_follow"
        if self.action_category == "making_errors":
            return "regular_error"
        return "regular_follow"


@dataclass(frozen=True)
class SamplingConfig:
    """Decoding parameters; the seed is mandatory so runs are reproducible."""

    seed: int
    temperature: float = 1.5
    top_p: float = 0.9

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise ValueError("top_p must be in (0, 1]")


def validate_session(session: Session, *, spans_required: bool = True) -> list[str]:
    """Return all invariant violations for ``session`` (empty list = valid)."""
    problems: list[str] = []
    steps = session.instructions.steps
    turns = session.turns

    if len(turns) != len(steps):
        problems.append(
            f"turn count {len(turns)} != step count {len(steps)} (one turn per step)"
        )
    for i, turn in enumerate(turns):
        if turn.index != i:
            problems.append(f"turn at position {i} has index {turn.index}")
    if sorted(t.step_index for t in turns) != list(range(len(steps))):
        problems.append("turn.step_index is not a bijection onto step indices")

    error_turns = sum(1 for t in turns if t.is_error_turn)
    error_steps = session.instructions.error_marked_count
    if error_turns != error_steps:
        problems.append(
            f"{error_turns} error turn(s) but {error_steps} error-marked step(s)"
        )
    if (session.action_category == "making_errors") != (error_turns > 0):
        problems.append(
            f"action_category {session.action_category!r} inconsistent with "
            f"{error_turns} error turn(s)"
        )

    missing = [t.index for t in turns if t.video_span is None]
    if spans_required and missing:
        problems.append(f"turns without video spans: {missing}")
    placed = [t for t in turns if t.video_span is not None]
    for prev, cur in zip(placed, placed[1:]):
        if cur.video_span[0] < prev.video_span[1]:
            problems.append(
                f"video spans of turns {prev.index} and {cur.index} overlap"
            )
    return problems


# --- serialization ----------------------------------------------------------
#
# Dict form uses only JSON-safe values; times are fixed three-decimal
# strings so a write/read cycle reproduces structurally equal sessions.


def _span_to_json(span: Span | None) -> list[str] | None:
    if span is None:
        return None
    return [fmt_seconds(span[0]), fmt_seconds(span[1])]


def _error_to_json(error: ErrorLabel | None) -> dict | None:
    if error is None:
        return None
    return {"kind": error.kind, "corrective_action": error.corrective_action}


def _error_from_json(data: dict | None) -> ErrorLabel | None:
    if data is None:
        return None
    return ErrorLabel(kind=data["kind"], corrective_action=data.get("corrective_action"))


def step_to_dict(step: AtomicStep) -> dict:
    return {
        "index": step.index,
        "text": step.text,
        "source_spans": [_span_to_json(s) for s in step.source_spans],
        "error_marked": step.error_marked,
        "error": _error_to_json(step.error),
        "inferred": step.inferred,
        "nuance": step.nuance,
    }


def step_from_dict(data: dict) -> AtomicStep:
    return AtomicStep(
        index=data["index"],
        text=data["text"],
        source_spans=tuple((a, b) for a, b in data["source_spans"]),
        error_marked=data["error_marked"],
        error=_error_from_json(data.get("error")),
        inferred=data.get("inferred", False),
        nuance=data.get("nuance"),
    )


def instructions_to_dict(instructions: InstructionList) -> dict:
    return {
        "task": instructions.task,
        "steps": [step_to_dict(s) for s in instructions.steps],
    }


def instructions_from_dict(data: dict) -> InstructionList:
    return InstructionList(
        task=data["task"], steps=tuple(step_from_dict(s) for s in data["steps"])
    )


def turn_to_dict(turn: DialogueTurn) -> dict:
    return {
        "index": turn.index,
        "user_utterance": turn.user_utterance,
        "expert_response": turn.expert_response,
        "step_index": turn.step_index,
        "is_error_turn": turn.is_error_turn,
        "video_span": _span_to_json(turn.video_span),
    }


def turn_from_dict(data: dict) -> DialogueTurn:
    span = data.get("video_span")
    return DialogueTurn(
        index=data["index"],
        user_utterance=data["user_utterance"],
        expert_response=data["expert_response"],
        step_index=data["step_index"],
        is_error_turn=data["is_error_turn"],
        video_span=tuple(span) if span is not None else None,
    )


def session_to_dict(session: Session) -> dict:
    return {
        "id": session.id,
        "source": session.source,
        "instructions": instructions_to_dict(session.instructions),
        "turns": [turn_to_dict(t) for t in session.turns],
        "speech_style": session.speech_style,
        "action_category": session.action_category,
        "split": session.split,
    }


def session_from_dict(data: dict) -> Session:
    return Session(
        id=data["id"],
        source=data["source"],
        instructions=instructions_from_dict(data["instructions"]),
        turns=tuple(turn_from_dict(t) for t in data["turns"]),
        speech_style=data["speech_style"],
        action_category=data["action_category"],
        split=data.get("split"),
    )


def with_split(session: Session, split: str | None) -> Session:
    return replace(session, split=split)
