from __future__ import annotations

from decimal import Decimal
from pathlib import Path

import pytest

from vid2dialog.errors import StageError, StructuredOutputError
from vid2dialog.gateway import MockBackend
from vid2dialog.ingestion import parse_subtitles
from vid2dialog.instructions import (
    form_from_annotations,
    form_from_transcript,
    load_stoplist,
    validate_atomicity,
)
from vid2dialog.model import (
    ActionAnnotation,
    AtomicStep,
    ErrorLabel,
    InstructionList,
    SamplingConfig,
)

FIXTURES = Path(__file__).parent / "fixtures"


def _ann(desc, start, end, error=None):
    return ActionAnnotation(description=desc, t_start=start, t_end=end, error=error)


# --- annotation route --------------------------------------------------------


def test_consecutive_duplicates_merge_spans():
    rows = [
        _ann("stir", 10, 15),
        _ann("stir", 15, 20),
        _ann("pour water", 20, 30),
    ]
    instructions = form_from_annotations(rows, "make tea", stoplist=frozenset())
    assert [s.text for s in instructions.steps] == ["stir", "pour water"]
    assert instructions.steps[0].source_spans == (
        (Decimal("10.000"), Decimal("15.000")),
        (Decimal("15.000"), Decimal("20.000")),
    )
    assert instructions.steps[1].source_spans == ((Decimal("20.000"), Decimal("30.000")),)


def test_merge_uses_normalized_descriptions():
    rows = [
        _ann("Stirring the tea.", 10, 15),
        _ann("stir the tea", 15, 20),
    ]
    instructions = form_from_annotations(rows, "make tea", stoplist=frozenset())
    assert len(instructions.steps) == 1
    assert instructions.steps[0].text == "stir the tea"


def test_non_consecutive_duplicates_stay_separate():
    rows = [
        _ann("stir", 10, 15),
        _ann("pour water", 16, 20),
        _ann("stir", 21, 25),
    ]
    instructions = form_from_annotations(rows, "make tea", stoplist=frozenset())
    assert [s.text for s in instructions.steps] == ["stir", "pour water", "stir"]


def test_stoplist_drops_non_essential_actions():
    rows = [
        _ann("open cupboard", 0, 3),
        _ann("boil the water", 5, 60),
        _ann("close cupboard", 62, 64),
    ]
    instructions = form_from_annotations(rows, "make tea", stoplist=load_stoplist())
    assert [s.text for s in instructions.steps] == ["boil the water"]


def test_all_steps_stopped_out_is_an_error():
    rows = [_ann("open cupboard", 0, 3), _ann("close cupboard", 4, 6)]
    with pytest.raises(StageError, match="no essential steps"):
        form_from_annotations(rows, "make tea", stoplist=load_stoplist())


def test_error_labels_become_error_marked_steps():
    rows = [
        _ann("spread the cheese", 0, 10),
        _ann("cut the log", 12, 20, ErrorLabel("modification", "use a serrated knife")),
    ]
    instructions = form_from_annotations(rows, "make pinwheels", stoplist=frozenset())
    assert instructions.error_marked_count == 1
    step = instructions.steps[1]
    assert step.error_marked
    assert step.error.corrective_action == "use a serrated knife"


def test_non_generative_error_labels_pass_through_unmarked():
    rows = [
        _ann("stir", 0, 10, ErrorLabel("omission")),
        _ann("pour", 12, 20),
    ]
    instructions = form_from_annotations(rows, "make tea", stoplist=frozenset())
    assert instructions.error_marked_count == 0
    assert instructions.steps[0].error.kind == "omission"


def test_error_labeled_duplicates_never_merge():
    rows = [
        _ann("stir", 0, 10, ErrorLabel("modification", "stir slower")),
        _ann("stir", 10, 20),
    ]
    instructions = form_from_annotations(rows, "make tea", stoplist=frozenset())
    assert len(instructions.steps) == 2


def test_generative_label_without_correction_is_an_error():
    rows = [_ann("cut the log", 0, 10, ErrorLabel("correction"))]
    with pytest.raises(StageError, match="corrective action"):
        form_from_annotations(rows, "make pinwheels", stoplist=frozenset())


def test_unsorted_annotations_rejected():
    rows = [_ann("b", 10, 20), _ann("a", 0, 5)]
    with pytest.raises(ValueError, match="sorted"):
        form_from_annotations(rows, "task")
    with pytest.raises(ValueError, match="empty"):
        form_from_annotations([], "task")


def test_annotation_route_span_coverage():
    rows = [_ann("fill the kettle", 8, 20), _ann("boil the water", 22, 95)]
    instructions = form_from_annotations(rows, "make tea", stoplist=frozenset())
    spans = [span for step in instructions.steps for span in step.source_spans]
    assert min(s[0] for s in spans) == Decimal("8.000")
    assert max(s[1] for s in spans) == Decimal("95.000")


# --- atomicity ---------------------------------------------------------------


def test_atomicity_flags_conjoined_step():
    steps = (AtomicStep(index=0, text="fold the filter and place it in the cone"),)
    report = validate_atomicity(InstructionList("make coffee", steps))
    assert not report.ok
    assert report.findings[0].issue == "multiple_actions"


def test_atomicity_flags_overlong_step():
    text = "stir " + "very " * 30 + "slowly"
    report = validate_atomicity(InstructionList("t", (AtomicStep(index=0, text=text),)))
    assert any(f.issue == "too_long" for f in report.findings)


def test_atomicity_flags_missing_spans():
    report = validate_atomicity(InstructionList("t", (AtomicStep(index=0, text="stir"),)))
    assert any(f.issue == "empty_spans" for f in report.findings)


def test_atomicity_accepts_clean_list():
    steps = (AtomicStep(index=0, text="stir the tea", source_spans=((1, 2),)),)
    assert validate_atomicity(InstructionList("make tea", steps)).ok


# --- transcript route (mock backend) -----------------------------------------


def _coffee_track():
    return parse_subtitles((FIXTURES / "coffee-01.srt").read_bytes(), "srt")


def test_transcript_route_splits_conjoined_cues():
    track = _coffee_track()
    instructions = form_from_transcript(
        track, "make pourover coffee", MockBackend(seed=1), SamplingConfig(seed=5)
    )
    texts = [s.text for s in instructions.steps]
    assert "fold the filter" in texts
    assert "place it in the cone" in texts
    assert validate_atomicity(instructions).ok
    # the split halves partition the cue's interval instead of sharing it
    fold = instructions.steps[texts.index("fold the filter")]
    place = instructions.steps[texts.index("place it in the cone")]
    assert fold.source_spans[0][1] == place.source_spans[0][0]
    assert place.inferred and not fold.inferred


def test_transcript_route_strips_narration_filler():
    instructions = form_from_transcript(
        _coffee_track(), "make pourover coffee", MockBackend(seed=1), SamplingConfig(seed=5)
    )
    assert instructions.steps[0].text == "boil some water in the kettle"
    assert instructions.steps[0].nuance.startswith("First I'm going to")


def test_transcript_route_spans_inside_track():
    track = _coffee_track()
    instructions = form_from_transcript(
        track, "make pourover coffee", MockBackend(seed=1), SamplingConfig(seed=5)
    )
    for step in instructions.steps:
        for start, end in step.source_spans:
            assert Decimal("0") <= start < end <= track.t_end
    starts = [s.source_spans[0][0] for s in instructions.steps]
    assert starts == sorted(starts)


def test_transcript_route_deterministic():
    track = _coffee_track()
    one = form_from_transcript(track, "make coffee", MockBackend(seed=1), SamplingConfig(seed=5))
    two = form_from_transcript(track, "make coffee", MockBackend(seed=1), SamplingConfig(seed=5))
    assert one == two


class _ScriptedBackend:
    backend_id = "scripted:1"

    def __init__(self, replies):
        self.replies = list(replies)
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        from vid2dialog.gateway import ChatResponse

        return ChatResponse(text=self.replies.pop(0), backend_id=self.backend_id)


def test_transcript_route_reprompts_on_bad_spans():
    track = _coffee_track()
    bad = '{"steps": [{"text": "boil water", "t_start": 50.0, "t_end": 20.0}]}'
    good = (
        '{"steps": [{"text": "boil water", "t_start": 5.0, "t_end": 12.0},'
        ' {"text": "grind the beans", "t_start": 14.0, "t_end": 21.5}]}'
    )
    backend = _ScriptedBackend([bad, good])
    instructions = form_from_transcript(track, "make coffee", backend, SamplingConfig(seed=5))
    assert len(instructions.steps) == 2
    assert len(backend.requests) == 2
    assert "inverted" in backend.requests[1].messages[-1].content


def test_transcript_route_gives_up_after_max_attempts():
    track = _coffee_track()
    conjoined = '{"steps": [{"text": "fold the filter and place it in the cone", "t_start": 1.0, "t_end": 2.0}]}'
    backend = _ScriptedBackend([conjoined] * 3)
    with pytest.raises(StructuredOutputError) as err:
        form_from_transcript(track, "make coffee", backend, SamplingConfig(seed=5))
    assert err.value.attempts == 3
