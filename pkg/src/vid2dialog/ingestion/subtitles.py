"""Hand-rolled SRT and WebVTT cue parsers.

Both parsers accept bytes (UTF-8, BOM tolerated) or str, report errors with
1-based line numbers, and round-trip through ``serialize_subtitles``:
``parse(serialize(parse(x)))`` equals ``parse(x)``.
"""

from __future__ import annotations

import re

from ..errors import ParseError
from ..model import SubtitleSegment, SubtitleTrack
from ..times import fmt_seconds, seconds

FORMATS = ("srt", "vtt")

# HH:MM:SS,mmm (SRT) or [HH:]MM:SS.mmm (VTT); both separators accepted on parse.
_TIME_RE = re.compile(r"^(?:(\d{1,3}):)?(\d{1,2}):(\d{1,2})[.,](\d{1,3})$")
_ARROW_RE = re.compile(r"\s-->\s")


def _decode(raw: bytes | str) -> str:
    if isinstance(raw, bytes):
        try:
            text = raw.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8: {exc}") from exc
    else:
        text = raw.lstrip("﻿")
    return text.replace("\r\n", "\n").replace("\r", "\n")


def _parse_timestamp(token: str, line_no: int):
    match = _TIME_RE.match(token.strip())
    if not match:
        raise ParseError(f"bad timestamp {token.strip()!r}", line=line_no)
    hours = int(match.group(1) or 0)
    minutes, secs = int(match.group(2)), int(match.group(3))
    if minutes > 59 or secs > 59:
        raise ParseError(f"timestamp field out of range in {token.strip()!r}", line=line_no)
    millis = match.group(4).ljust(3, "0")
    return seconds(f"{hours * 3600 + minutes * 60 + secs}.{millis}")


def _parse_cue_times(line: str, line_no: int):
    pieces = _ARROW_RE.split(line, maxsplit=1)
    if len(pieces) != 2:
        raise ParseError(f"expected 'start --> end', got {line!r}", line=line_no)
    start = _parse_timestamp(pieces[0], line_no)
    # VTT allows cue settings after the end timestamp.
    end_token = pieces[1].strip().split(" ")[0]
    end = _parse_timestamp(end_token, line_no)
    if end <= start:
        raise ParseError(f"cue ends at {end} before it starts at {start}", line=line_no)
    return start, end


def _blocks(lines: list[str]):
    """Yield (first_line_number, block_lines) for blank-line-separated blocks."""
    block: list[str] = []
    start = 1
    for i, line in enumerate(lines, start=1):
        if line.strip():
            if not block:
                start = i
            block.append(line)
        elif block:
            yield start, block
            block = []
    if block:
        yield start, block


def parse_subtitles(raw: bytes | str, format: str) -> SubtitleTrack:
    if format not in FORMATS:
        raise ValueError(f"unknown subtitle format {format!r}; expected one of {FORMATS}")
    text = _decode(raw)
    lines = text.split("\n")
    segments: list[SubtitleSegment] = []
    first = True
    for line_no, block in _blocks(lines):
        if format == "vtt" and first and block[0].startswith("WEBVTT"):
            first = False
            continue
        first = False
        if format == "vtt" and block[0].split(" ")[0] in ("NOTE", "STYLE", "REGION"):
            continue
        offset = 0
        if "-->" not in block[0]:
            # SRT index line, or a VTT cue identifier.
            if format == "srt" and not block[0].strip().isdigit():
                raise ParseError(f"expected a cue index, got {block[0]!r}", line=line_no)
            offset = 1
        if offset >= len(block) or "-->" not in block[offset]:
            raise ParseError("cue block has no timing line", line=line_no)
        t_start, t_end = _parse_cue_times(block[offset], line_no + offset)
        body = " ".join(part.strip() for part in block[offset + 1 :]).strip()
        if not body:
            raise ParseError("cue block has no text", line=line_no)
        segments.append(SubtitleSegment(text=body, t_start=t_start, t_end=t_end))
    if not segments:
        raise ParseError("no subtitle cues found")
    return SubtitleTrack(segments=tuple(segments))


def _format_timestamp(value, format: str) -> str:
    total_ms = int(round(float(value) * 1000))
    hours, rest = divmod(total_ms, 3_600_000)
    minutes, rest = divmod(rest, 60_000)
    secs, millis = divmod(rest, 1000)
    sep = "," if format == "srt" else "."
    return f"{hours:02d}:{minutes:02d}:{secs:02d}{sep}{millis:03d}"


def serialize_subtitles(track: SubtitleTrack, format: str) -> str:
    if format not in FORMATS:
        raise ValueError(f"unknown subtitle format {format!r}; expected one of {FORMATS}")
    out: list[str] = []
    if format == "vtt":
        out.append("WEBVTT")
        out.append("")
    for i, seg in enumerate(track.segments, start=1):
        if format == "srt":
            out.append(str(i))
        out.append(
            f"{_format_timestamp(seg.t_start, format)} --> {_format_timestamp(seg.t_end, format)}"
        )
        out.append(seg.text)
        out.append("")
    return "\n".join(out)


def track_span_seconds(track: SubtitleTrack) -> str:
    """Human-readable '[start - end]' summary, used in reports."""
    return f"[{fmt_seconds(track.t_start)} - {fmt_seconds(track.t_end)}]"
