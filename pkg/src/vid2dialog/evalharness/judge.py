"""LLM-as-a-judge protocol with randomized presentation order.

The judge sees the task, the user query, and the reference and candidate
responses under neutral "Response A" / "Response B" labels. Which response
comes first is drawn from the caller's rng and recorded on every verdict, so
order bias stays measurable. The judge must answer with a justification and
a final ``Score: <1-5>`` line; one repair re-prompt is allowed before the
turn counts as a judging error.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass

from ..errors import Vid2DialogError
from ..gateway import ChatRequest, Message, load_template, render
from ..model import SamplingConfig

PRESENTATION_ORDERS = ("reference_first", "candidate_first")

_SCORE_RE = re.compile(r"Score:\s*(-?\d+)")

_JUDGE_SAMPLING = SamplingConfig(seed=0, temperature=0.0, top_p=1.0)


class JudgeError(Vid2DialogError):
    """The judge backend never produced a parseable in-range score."""


@dataclass(frozen=True)
class JudgeVerdict:
    score: int
    justification: str
    presentation_order: str
    session_id: str
    turn_index: int

    def __post_init__(self) -> None:
        if self.score not in (1, 2, 3, 4, 5):
            raise ValueError(f"judge score must be 1..5, got {self.score}")
        if self.presentation_order not in PRESENTATION_ORDERS:
            raise ValueError(f"unknown presentation order {self.presentation_order!r}")

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "justification": self.justification,
            "presentation_order": self.presentation_order,
            "session_id": self.session_id,
            "turn_index": self.turn_index,
        }


def parse_verdict_text(text: str) -> tuple[int | None, str]:
    """Return (score or None, justification). The last Score line wins."""
    matches = list(_SCORE_RE.finditer(text))
    if not matches:
        return None, text.strip()
    last = matches[-1]
    score = int(last.group(1))
    justification = (text[: last.start()] + text[last.end() :]).strip()
    if score not in (1, 2, 3, 4, 5):
        return None, justification
    return score, justification


def judge(
    task: str,
    user_query: str,
    reference: str,
    candidate: str,
    rng: random.Random,
    judge_backend,
    *,
    session_id: str = "",
    turn_index: int = 0,
    sampling: SamplingConfig = _JUDGE_SAMPLING,
) -> JudgeVerdict:
    order = rng.choice(PRESENTATION_ORDERS)
    if order == "reference_first":
        response_a, response_b = reference, candidate
        candidate_label, reference_label = "Response B", "Response A"
    else:
        response_a, response_b = candidate, reference
        candidate_label, reference_label = "Response A", "Response B"
    prompt = render(
        "judge",
        task=task,
        query=user_query,
        response_a=response_a,
        response_b=response_b,
        candidate_label=candidate_label,
        reference_label=reference_label,
    )
    request = ChatRequest(
        system=render("system"),
        messages=(Message("user", prompt),),
        sampling=sampling,
        purpose="judge",
    )
    raw = judge_backend.complete(request).text
    score, justification = parse_verdict_text(raw)
    if score is None:
        retry = request.with_exchange(raw, load_template("judge_repair"))
        raw = judge_backend.complete(retry).text
        score, justification = parse_verdict_text(raw)
    if score is None:
        raise JudgeError(
            f"judge reply for {session_id or '<turn>'}/{turn_index} had no usable score "
            f"after one retry (last reply: {raw[:120]!r})"
        )
    return JudgeVerdict(
        score=score,
        justification=justification,
        presentation_order=order,
        session_id=session_id,
        turn_index=turn_index,
    )
