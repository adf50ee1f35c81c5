"""Stage 2: turn an instruction list into an expert/novice conversation.

One step becomes exactly one turn; the backend writes the turn bodies while
this module pins the structure: the session opens with a templated user
request for guidance, the final expert reply closes the task, error-marked
steps become corrective turns, and (for the regular style) a seeded subset
of turns carries a clarification question built from narration detail.

Structure is a pure function of the inputs; the sampling seed only moves
wording. Variant seeds derive as (seed, seed + 1) so multi-variant runs stay
reproducible.
"""

from __future__ import annotations

import random
from dataclasses import replace

from .errors import StageError
from .gateway import ChatRequest, Message, complete_structured, render
from .model import (
    AtomicStep,
    DialogueTurn,
    InstructionList,
    SamplingConfig,
    Session,
)

DEFAULT_CLARIFICATION_RATE = 0.3

_OPENERS = {
    "regular": (
        "hi! i want to {task} today. can you walk me through it step by step?",
        "hey, could you guide me through how to {task}? i haven't done it before.",
        "hello! i'm about to {task}. what's the first thing i should do?",
    ),
    "concise": (
        "help me {task}?",
        "guide me: {task}",
        "{task} - where do i start?",
    ),
}

_CLOSERS = (
    "that's everything - the task is done. nice work!",
    "and that finishes the whole task. well done!",
    "that was the last step, so you're all done. great job!",
)


def mark_error_steps(steps) -> str:
    """Prompt-ready rendering; error-marked steps carry the <user error> token.

    Accepts an InstructionList or any sequence of steps (an empty sequence
    renders to an empty string).
    """
    if isinstance(steps, InstructionList):
        steps = steps.steps
    lines = []
    for step in steps:
        if step.error_marked:
            lines.append(
                f"STEP {step.index} <user error kind={step.error.kind} "
                f'correct="{step.error.corrective_action}">: {step.text}'
            )
        elif step.nuance:
            lines.append(f'STEP {step.index} (narration: "{step.nuance}"): {step.text}')
        else:
            lines.append(f"STEP {step.index}: {step.text}")
    return "\n".join(lines)


_TURN_SCHEMA = {
    "type": "object",
    "required": ["turns"],
    "properties": {
        "turns": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["user", "expert"],
                "properties": {
                    "user": {"type": "string", "minLength": 1},
                    "expert": {"type": "string", "minLength": 1},
                },
            },
        }
    },
}


def _pick_clarification_turns(
    steps: tuple[AtomicStep, ...], rate: float, rng: random.Random
) -> tuple[int, ...]:
    # Turn 0's user side gets replaced by the opener, so index 0 never clarifies.
    candidates = [s.index for s in steps if s.nuance and not s.error_marked and s.index > 0]
    budget = min(int(rate * len(steps)), len(candidates))
    if budget <= 0:
        return ()
    return tuple(sorted(rng.sample(candidates, budget)))


def _dialogue_request(
    instruction_list: InstructionList,
    style: str,
    sampling: SamplingConfig,
    clarify: tuple[int, ...],
) -> ChatRequest:
    prompt = render(
        "dialogue",
        task=instruction_list.task,
        style=style,
        clarify=",".join(str(i) for i in clarify) if clarify else "none",
        steps=mark_error_steps(instruction_list),
    )
    return ChatRequest(
        system=render("system"),
        messages=(Message("user", prompt),),
        sampling=sampling,
        purpose="dialogue",
    )


def generate_dialogue(
    instruction_list: InstructionList,
    style: str,
    sampling: SamplingConfig,
    backend,
    *,
    source_id: str,
    clarification_rate: float = DEFAULT_CLARIFICATION_RATE,
    max_attempts: int = 3,
) -> Session:
    """Write one session; spans stay unfilled until localization."""
    if style not in _OPENERS:
        raise ValueError(f"unknown speech style {style!r}")
    has_errors = instruction_list.error_marked_count > 0
    if has_errors and style != "regular":
        raise ValueError("error-marked lists only support the regular style")

    steps = instruction_list.steps
    rng = random.Random(f"{sampling.seed}|{source_id}|{style}|{instruction_list.task}")
    clarify = ()
    if style == "regular":
        clarify = _pick_clarification_turns(steps, clarification_rate, rng)

    request = _dialogue_request(instruction_list, style, sampling, clarify)
    expected = len(steps)
    count_mismatches = 0

    # Shape problems repair inside complete_structured up to max_attempts; a
    # wrong turn count gets exactly one re-prompt before becoming a stage error.
    def check_count(data: dict) -> str | None:
        nonlocal count_mismatches
        got = len(data["turns"])
        if got == expected:
            return None
        count_mismatches += 1
        if count_mismatches > 1:
            raise StageError(
                f"source {source_id!r}: backend wrote {got} turns for {expected} steps twice"
            )
        return (
            f"you wrote {got} turns but there are {expected} steps; "
            "write exactly one turn per step"
        )

    data, _ = complete_structured(
        request, _TURN_SCHEMA, backend, max_attempts=max_attempts, semantic_check=check_count
    )

    opener = rng.choice(_OPENERS[style]).format(task=instruction_list.task)
    closer = rng.choice(_CLOSERS)
    turns = []
    for step, body in zip(steps, data["turns"]):
        user = body["user"].strip()
        expert = body["expert"].strip()
        if step.index == 0:
            user = opener
        if step.index == len(steps) - 1:
            expert = f"{expert} {closer}"
        turns.append(
            DialogueTurn(
                index=step.index,
                user_utterance=user,
                expert_response=expert,
                step_index=step.index,
                is_error_turn=step.error_marked,
            )
        )
    return Session(
        id=f"{source_id}-{style}",
        source=source_id,
        instructions=instruction_list,
        turns=tuple(turns),
        speech_style=style,
        action_category="making_errors" if has_errors else "following_steps",
    )


def generate_variants(
    instruction_list: InstructionList,
    sampling: SamplingConfig,
    backend,
    *,
    source_id: str,
    clarification_rate: float = DEFAULT_CLARIFICATION_RATE,
) -> list[Session]:
    """[regular, concise] for error-free lists; error-marked lists get regular only."""
    sessions = [
        generate_dialogue(
            instruction_list,
            "regular",
            sampling,
            backend,
            source_id=source_id,
            clarification_rate=clarification_rate,
        )
    ]
    if instruction_list.error_marked_count == 0:
        sessions.append(
            generate_dialogue(
                instruction_list,
                "concise",
                replace(sampling, seed=sampling.seed + 1),
                backend,
                source_id=source_id,
                clarification_rate=clarification_rate,
            )
        )
    return sessions
