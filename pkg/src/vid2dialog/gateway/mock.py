"""Deterministic offline backend for tests, fixtures, and dry runs.

The mock is a pure function of (constructor seed, full request content): it
parses the machine-readable lines our prompt templates render (CUE, STEP,
TASK, STYLE, CLARIFY, Response A/B) and synthesizes a plausible reply with a
request-keyed ``random.Random``. Same request, same reply, byte for byte; a
different sampling seed changes wording but never structure (step counts,
turn counts, spans, scores derived from content).
"""

from __future__ import annotations

import hashlib
import json
import random
import re

from ..textnorm import imperativize, split_conjoined
from .types import ChatRequest, ChatResponse

_CUE_RE = re.compile(r"^CUE \[([0-9.]+)-([0-9.]+)\]: (.*)$")
_STEP_ERR_RE = re.compile(r'^STEP (\d+) <user error kind=(\w+) correct="(.*)">: (.*)$')
_STEP_RE = re.compile(r'^STEP (\d+)(?: \(narration: "(.*)"\))?: (.*)$')
_LABELLED_RE = re.compile(r"^(TASK|STYLE|CLARIFY|USER QUERY): (.*)$")
_EVAL_LABEL_RE = re.compile(r"(Response [AB]) is the reply under evaluation")
_RESPONSE_RE = re.compile(r"^Response ([AB]):\n(.*?)(?=\n\nResponse [AB]:|\n\n[A-Z]|\Z)", re.M | re.S)

_USER_CONCISE = ("done. next?", "ok, next?", "what now?", "next step?", "and then?", "got it, next")
_USER_REGULAR = (
    "okay, that part is done. what should i do next?",
    "alright, i finished that. can you tell me what comes next?",
    "i think i managed that one. what is the next thing to do?",
    "that went fine, i believe. what do i need to do after this?",
    "done with that one. where do we go from here?",
)
_EXPERT_LEAD = ("now", "next,", "go ahead and", "alright,", "okay, now")
_EXPERT_TAIL = (
    "let me know when you're done.",
    "take your time with it.",
    "tell me once that's finished.",
    "you're doing great so far.",
)
_MISTAKE_TAIL = (
    "no harm done, just fix that and we'll keep going.",
    "take a second to redo it, then we'll continue.",
    "easy to fix, go ahead and sort that out first.",
)


class MockBackend:
    def __init__(self, seed: int = 0) -> None:
        self.seed = seed
        self.backend_id = f"mock:{seed}"

    def complete(self, request: ChatRequest) -> ChatResponse:
        text = self._dispatch(request)
        return ChatResponse(text=text, backend_id=self.backend_id)

    def _rng(self, request: ChatRequest, *extra: object) -> random.Random:
        parts = [str(self.seed), str(request.sampling.seed), request.purpose, request.system]
        parts.extend(f"{m.role}\x1f{m.content}" for m in request.messages)
        parts.extend(str(e) for e in extra)
        digest = hashlib.sha256("\x1e".join(parts).encode("utf-8")).hexdigest()
        return random.Random(int(digest[:16], 16))

    def _dispatch(self, request: ChatRequest) -> str:
        if request.purpose == "instruction_formation":
            return self._form_instructions(request)
        if request.purpose == "dialogue":
            return self._write_dialogue(request)
        if request.purpose == "judge":
            return self._judge(request)
        rng = self._rng(request)
        return rng.choice(
            (
                "understood, proceeding as instructed.",
                "noted. here is a best-effort reply.",
                "acknowledged; nothing more to add.",
            )
        )

    # ---- instruction formation ------------------------------------------

    def _form_instructions(self, request: ChatRequest) -> str:
        prompt = request.messages[-1].content
        cues = [
            (m.group(1), m.group(2), m.group(3))
            for m in (_CUE_RE.match(line) for line in prompt.splitlines())
            if m
        ]
        steps = []
        for start, end, raw in cues:
            clause = imperativize(raw)
            parts = split_conjoined(clause)
            # A split cue apportions its interval so the parts stay orderable
            # and never share the exact same span.
            t0, t1 = float(start), float(end)
            width = (t1 - t0) / len(parts)
            for i, part in enumerate(parts):
                steps.append(
                    {
                        "text": part,
                        "t_start": round(t0 + i * width, 3),
                        "t_end": round(t1 if i == len(parts) - 1 else t0 + (i + 1) * width, 3),
                        "inferred": i > 0,
                        "nuance": raw.strip(),
                    }
                )
        return json.dumps({"steps": steps}, ensure_ascii=False)

    # ---- dialogue writing -------------------------------------------------

    def _write_dialogue(self, request: ChatRequest) -> str:
        prompt = request.messages[-1].content
        labels = dict(
            m.groups() for m in (_LABELLED_RE.match(l) for l in prompt.splitlines()) if m
        )
        style = labels.get("STYLE", "regular")
        clarify_field = labels.get("CLARIFY", "none")
        clarify = set()
        if clarify_field.strip() not in ("", "none"):
            clarify = {int(x) for x in clarify_field.split(",")}
        turns = []
        for line in prompt.splitlines():
            err = _STEP_ERR_RE.match(line)
            if err:
                idx, kind, correct, text = err.groups()
                turns.append(self._error_turn(request, int(idx), kind, correct, text))
                continue
            plain = _STEP_RE.match(line)
            if plain:
                idx, narration, text = plain.groups()
                turns.append(
                    self._plain_turn(request, int(idx), text, narration, style, int(idx) in clarify)
                )
        return json.dumps({"turns": turns}, ensure_ascii=False)

    def _plain_turn(
        self,
        request: ChatRequest,
        index: int,
        text: str,
        narration: str | None,
        style: str,
        clarify: bool,
    ) -> dict:
        rng = self._rng(request, "turn", index, text)
        if style == "concise":
            user = rng.choice(_USER_CONCISE)
        else:
            user = rng.choice(_USER_REGULAR)
            if clarify and narration:
                snippet = " ".join(narration.split()[:6]).rstrip(".,;")
                user += f' quick question: you said "{snippet}" - anything i should watch out for?'
        expert = f"{rng.choice(_EXPERT_LEAD)} {text}. {rng.choice(_EXPERT_TAIL)}"
        return {"user": user, "expert": expert}

    def _error_turn(
        self, request: ChatRequest, index: int, kind: str, correct: str, text: str
    ) -> dict:
        rng = self._rng(request, "error_turn", index, text)
        user = f"so i went ahead and tried to {text}. did i do that right?"
        expert = (
            f"actually, that's not quite right - you should {correct} instead. "
            f"{rng.choice(_MISTAKE_TAIL)}"
        )
        return {"user": user, "expert": expert}

    # ---- judging -----------------------------------------------------------

    def _judge(self, request: ChatRequest) -> str:
        prompt = request.messages[-1].content
        blocks = {label: body.strip() for label, body in _RESPONSE_RE.findall(prompt)}
        label_match = _EVAL_LABEL_RE.search(prompt)
        if len(blocks) != 2 or not label_match:
            return "I cannot tell the responses apart."
        cand_label = label_match.group(1)[-1]
        candidate = blocks.get(cand_label, "")
        reference = blocks.get("B" if cand_label == "A" else "A", "")
        score = self._overlap_score(candidate, reference)
        rng = self._rng(request, "judge")
        opinions = {
            5: "the reply matches the reference guidance almost exactly.",
            4: "the reply covers the reference instruction with minor wording drift.",
            3: "the reply is partially aligned with what the user needs here.",
            2: "the reply only loosely relates to the expected instruction.",
            1: "the reply does not give the user the guidance they need.",
        }
        lead = rng.choice(("Comparing both responses, ", "Looking at the exchange, ", ""))
        return f"{lead}{opinions[score]}\nScore: {score}"

    @staticmethod
    def _overlap_score(candidate: str, reference: str) -> int:
        cand = set(re.findall(r"[a-z0-9']+", candidate.lower()))
        ref = set(re.findall(r"[a-z0-9']+", reference.lower()))
        if not cand or not ref:
            return 1
        jaccard = len(cand & ref) / len(cand | ref)
        return max(1, min(5, 1 + round(jaccard * 4)))
