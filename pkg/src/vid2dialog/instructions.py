"""Stage 1: build the canonical atomic instruction list for a task.

Two routes produce the same shape:

- ``form_from_transcript`` sends narration cues to a chat backend and parses
  a JSON step list back (times inferred in the same call, so each step lands
  inside the track's time range).
- ``form_from_annotations`` is pure rules: normalize descriptions, drop
  non-essential actions via a stop-list, merge consecutive duplicates, and
  carry usable error labels through as error-marked steps.

Both outputs satisfy the same ordering and span-coverage guarantees, so the
rest of the pipeline never cares which route a list came from.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .errors import StageError
from .gateway import ChatRequest, Message, complete_structured, render
from .model import (
    GENERATIVE_ERROR_KINDS,
    ActionAnnotation,
    AtomicStep,
    InstructionList,
    SamplingConfig,
    SubtitleTrack,
    make_span,
)
from .textnorm import normalize_description, split_conjoined, word_count
from .times import fmt_seconds, seconds

DEFAULT_MAX_STEP_WORDS = 25


def load_stoplist(path: str | None = None) -> frozenset[str]:
    """Phrases (one per line, normalized on load) naming non-essential actions."""
    if path is None:
        text = resources.files("vid2dialog").joinpath("data/stoplist.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    phrases = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            phrases.add(normalize_description(line))
    return frozenset(phrases)


# ---------------------------------------------------------------------------
# atomicity validation


@dataclass(frozen=True)
class AtomicityFinding:
    step_index: int
    issue: str  # multiple_actions | too_long | empty_spans
    detail: str


@dataclass(frozen=True)
class AtomicityReport:
    findings: tuple[AtomicityFinding, ...]

    @property
    def ok(self) -> bool:
        return not self.findings


def validate_atomicity(
    instruction_list: InstructionList, *, max_words: int = DEFAULT_MAX_STEP_WORDS
) -> AtomicityReport:
    """Advisory for the annotation route, a re-prompt trigger for the LLM route."""
    findings: list[AtomicityFinding] = []
    for step in instruction_list.steps:
        clauses = split_conjoined(step.text)
        if len(clauses) > 1:
            findings.append(
                AtomicityFinding(
                    step.index,
                    "multiple_actions",
                    f"{step.text!r} chains {len(clauses)} imperative clauses",
                )
            )
        if word_count(step.text) > max_words:
            findings.append(
                AtomicityFinding(
                    step.index,
                    "too_long",
                    f"{word_count(step.text)} words exceeds the {max_words}-word ceiling",
                )
            )
        if not step.source_spans:
            findings.append(AtomicityFinding(step.index, "empty_spans", "no provenance span"))
    return AtomicityReport(findings=tuple(findings))


# ---------------------------------------------------------------------------
# annotation route (pure rules)


def form_from_annotations(
    annotations: list[ActionAnnotation],
    task: str,
    *,
    stoplist: frozenset[str] | None = None,
) -> InstructionList:
    if not annotations:
        raise ValueError("annotation list is empty")
    starts = [a.t_start for a in annotations]
    if starts != sorted(starts):
        raise ValueError("annotations must be sorted by start time")
    if stoplist is None:
        stoplist = load_stoplist()

    kept = [a for a in annotations if normalize_description(a.description) not in stoplist]
    if not kept:
        raise StageError(f"task {task!r}: no essential steps remain after stop-list filtering")

    # One group per output step. Consecutive identical normalized descriptions
    # merge, except that error-labeled annotations always stand alone so each
    # usable error label yields exactly one error-marked step.
    groups: list[list[ActionAnnotation]] = []
    for annotation in kept:
        if (
            groups
            and annotation.error is None
            and groups[-1][-1].error is None
            and normalize_description(annotation.description)
            == normalize_description(groups[-1][-1].description)
        ):
            groups[-1].append(annotation)
        else:
            groups.append([annotation])

    steps: list[AtomicStep] = []
    for index, group in enumerate(groups):
        head = group[0]
        error = head.error
        marked = error is not None and error.kind in GENERATIVE_ERROR_KINDS
        if marked and not error.corrective_action:
            raise StageError(
                f"task {task!r}: {error.kind} label on {head.description!r} "
                "has no corrective action"
            )
        steps.append(
            AtomicStep(
                index=index,
                text=normalize_description(head.description),
                source_spans=tuple(make_span(a.t_start, a.t_end) for a in group),
                error_marked=marked,
                error=error,
            )
        )
    return InstructionList(task=task, steps=tuple(steps))


# ---------------------------------------------------------------------------
# transcript route (LLM)

_STEP_SCHEMA = {
    "type": "object",
    "required": ["steps"],
    "properties": {
        "steps": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["text", "t_start", "t_end"],
                "properties": {
                    "text": {"type": "string", "minLength": 1},
                    "t_start": {"type": "number"},
                    "t_end": {"type": "number"},
                    "inferred": {"type": "boolean"},
                    "nuance": {"type": ["string", "null"]},
                },
            },
        }
    },
}


def render_cues(track: SubtitleTrack) -> str:
    return "\n".join(
        f"CUE [{fmt_seconds(seg.t_start)}-{fmt_seconds(seg.t_end)}]: {seg.text}"
        for seg in track.segments
    )


def _check_steps(data: dict, track: SubtitleTrack, max_words: int) -> str | None:
    """Semantic validation driving the structured-output repair loop."""
    previous_start = None
    for i, raw in enumerate(data["steps"]):
        if raw["t_end"] <= raw["t_start"]:
            return f"step {i} has an empty or inverted time span"
        if raw["t_start"] < 0 or seconds(raw["t_end"]) > track.t_end:
            return f"step {i} lies outside the transcript's time range"
        if previous_start is not None and raw["t_start"] < previous_start:
            return f"step {i} is out of execution order"
        previous_start = raw["t_start"]
        if len(split_conjoined(raw["text"])) > 1:
            return f"step {i} chains several actions; split it into separate steps"
        if word_count(raw["text"]) > max_words:
            return f"step {i} is longer than {max_words} words; shorten it"
    return None


def form_from_transcript(
    track: SubtitleTrack,
    task: str,
    backend,
    sampling: SamplingConfig,
    *,
    max_attempts: int = 3,
    max_words: int = DEFAULT_MAX_STEP_WORDS,
) -> InstructionList:
    if not track.segments:
        raise ValueError("subtitle track is empty")
    request = ChatRequest(
        system=render("system"),
        messages=(
            Message("user", render("instruction_formation", task=task, cues=render_cues(track))),
        ),
        sampling=sampling,
        purpose="instruction_formation",
    )
    data, _attempts = complete_structured(
        request,
        _STEP_SCHEMA,
        backend,
        max_attempts=max_attempts,
        semantic_check=lambda value: _check_steps(value, track, max_words),
    )
    steps = tuple(
        AtomicStep(
            index=i,
            text=raw["text"].strip(),
            source_spans=(make_span(seconds(raw["t_start"]), seconds(raw["t_end"])),),
            inferred=bool(raw.get("inferred", False)),
            nuance=(raw.get("nuance") or None),
        )
        for i, raw in enumerate(data["steps"])
    )
    return InstructionList(task=task, steps=steps)
