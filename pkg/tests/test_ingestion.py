from __future__ import annotations

from decimal import Decimal
from pathlib import Path

import pytest

from vid2dialog.errors import ManifestError, ParseError, SchemaError
from vid2dialog.ingestion import (
    AnnotationSchema,
    load_manifest,
    parse_action_annotations,
    parse_subtitles,
    serialize_subtitles,
)

FIXTURES = Path(__file__).parent / "fixtures"


# --- subtitles ---------------------------------------------------------------


def test_parse_srt_fixture():
    track = parse_subtitles((FIXTURES / "coffee-01.srt").read_bytes(), "srt")
    assert len(track.segments) == 6
    first = track.segments[0]
    assert first.t_start == Decimal("5.000")
    assert first.t_end == Decimal("12.000")
    assert first.text.startswith("First I'm going to boil")
    assert track.segments[-1].t_end == Decimal("75.000")


def test_parse_vtt_fixture():
    track = parse_subtitles((FIXTURES / "omelet-01.vtt").read_bytes(), "vtt")
    assert len(track.segments) == 5
    assert track.segments[0].t_start == Decimal("8.000")
    assert track.segments[-1].t_end == Decimal("70.000")


def test_srt_round_trip_is_idempotent():
    raw = (FIXTURES / "coffee-01.srt").read_text("utf-8")
    track = parse_subtitles(raw, "srt")
    once = serialize_subtitles(track, "srt")
    assert parse_subtitles(once, "srt") == track
    assert serialize_subtitles(parse_subtitles(once, "srt"), "srt") == once


def test_vtt_round_trip_is_idempotent():
    raw = (FIXTURES / "omelet-01.vtt").read_text("utf-8")
    track = parse_subtitles(raw, "vtt")
    once = serialize_subtitles(track, "vtt")
    assert parse_subtitles(once, "vtt") == track
    assert serialize_subtitles(parse_subtitles(once, "vtt"), "vtt") == once


def test_srt_handles_bom_and_crlf():
    raw = b"\xef\xbb\xbf1\r\n00:00:01,000 --> 00:00:02,000\r\nhello there\r\n"
    track = parse_subtitles(raw, "srt")
    assert track.segments[0].text == "hello there"


def test_multiline_cue_text_joins():
    raw = "1\n00:00:01,000 --> 00:00:04,000\nline one\nline two\n"
    track = parse_subtitles(raw, "srt")
    assert track.segments[0].text == "line one line two"


def test_inverted_times_report_line_number():
    raw = "1\n00:00:05,000 --> 00:00:02,000\nbackwards\n"
    with pytest.raises(ParseError) as err:
        parse_subtitles(raw, "srt")
    assert err.value.line == 2


def test_malformed_timestamp_reports_line_number():
    raw = "1\n00:00:xx,000 --> 00:00:02,000\nbad stamp\n"
    with pytest.raises(ParseError) as err:
        parse_subtitles(raw, "srt")
    assert err.value.line == 2


def test_minutes_over_59_rejected():
    raw = "1\n00:61:00,000 --> 00:62:00,000\nbad clock\n"
    with pytest.raises(ParseError):
        parse_subtitles(raw, "srt")


def test_empty_input_rejected():
    with pytest.raises(ParseError, match="no subtitle cues"):
        parse_subtitles("", "srt")
    with pytest.raises(ParseError, match="no subtitle cues"):
        parse_subtitles("WEBVTT\n\nNOTE nothing here\n", "vtt")


def test_unknown_format_rejected():
    with pytest.raises(ValueError):
        parse_subtitles("x", "ass")


def test_vtt_skips_note_and_style_blocks():
    raw = (
        "WEBVTT\n\nSTYLE\n::cue { color: red }\n\nNOTE a comment\n\n"
        "intro\n00:01.000 --> 00:02.500 align:start\nwipe the counter\n"
    )
    track = parse_subtitles(raw, "vtt")
    assert len(track.segments) == 1
    assert track.segments[0].t_end == Decimal("2.500")


# --- annotation tables -------------------------------------------------------

_PLAIN = AnnotationSchema(format="csv")
_WITH_ERRORS = AnnotationSchema(format="csv", error_kind="error_kind", correction="correction")


def test_parse_csv_fixture_sorted():
    rows = parse_action_annotations((FIXTURES / "tea-01.csv").read_bytes(), _PLAIN)
    assert len(rows) == 10
    starts = [r.t_start for r in rows]
    assert starts == sorted(starts)
    assert rows[0].description == "open cupboard"
    assert rows[0].error is None


def test_parse_error_columns():
    rows = parse_action_annotations((FIXTURES / "pinwheels-01.csv").read_bytes(), _WITH_ERRORS)
    labelled = [r for r in rows if r.error is not None]
    assert [(r.error.kind, bool(r.error.corrective_action)) for r in labelled] == [
        ("modification", True),
        ("correction", True),
    ]


def test_unknown_error_kind_lists_accepted():
    raw = "description,start,end,error_kind,correction\nstir,1,2,typo,fix it\n"
    with pytest.raises(SchemaError) as err:
        parse_action_annotations(raw, _WITH_ERRORS)
    assert "modification" in str(err.value)


def test_bad_time_reports_row():
    raw = "description,start,end\nstir,abc,2\n"
    with pytest.raises(ParseError) as err:
        parse_action_annotations(raw, _PLAIN)
    assert "line 1" in str(err.value)


def test_missing_column_rejected():
    raw = "action,start,end\nstir,1,2\n"
    with pytest.raises(SchemaError, match="description"):
        parse_action_annotations(raw, _PLAIN)


def test_json_table_format():
    schema = AnnotationSchema(format="json")
    raw = '[{"description": "stir", "start": 1.0, "end": 2.0}]'
    rows = parse_action_annotations(raw, schema)
    assert rows[0].description == "stir"
    assert rows[0].t_end == Decimal("2.000")


def test_tsv_table_format():
    schema = AnnotationSchema(format="tsv")
    raw = "description\tstart\tend\nstir\t1\t2\n"
    rows = parse_action_annotations(raw, schema)
    assert len(rows) == 1


# --- manifest curation -------------------------------------------------------


def test_manifest_curation_fixture():
    kept, report = load_manifest(FIXTURES / "manifest.json")
    assert [c.video.id for c in kept] == ["coffee-01", "omelet-01", "tea-01", "pinwheels-01"]
    reasons = {e["id"]: e["reason"] for e in report.excluded}
    assert reasons["drone-01"] == "not egocentric"
    assert "omission" in reasons["stew-01"]
    assert "sidecar" in reasons["soup-01"]
    assert any("soup-01" in w for w in report.warnings)


def test_duplicate_source_ids_rejected():
    with pytest.raises(ManifestError, match="duplicate"):
        load_manifest(FIXTURES / "manifest_duplicate.json")


def test_missing_manifest_and_bad_json(tmp_path):
    with pytest.raises(ManifestError, match="not found"):
        load_manifest(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", "utf-8")
    with pytest.raises(ManifestError, match="line"):
        load_manifest(bad)


def test_narrated_source_needs_subtitles_block(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(
        '{"sources": [{"id": "x", "task": "t", "domain": "cooking", "duration": 10,'
        ' "kind": "narrated", "uri": "x.mp4"}]}',
        "utf-8",
    )
    with pytest.raises(ManifestError, match="subtitles"):
        load_manifest(path)
