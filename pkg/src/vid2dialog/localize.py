"""Stage 3: give every turn its video span, then repair span pathologies.

Annotation-path spans aggregate a step's provenance intervals to (min start,
max end); merged steps whose interior gap exceeds a threshold are kept but
flagged. Subtitle-path spans copy the step's inferred interval. Both paths
clip to [0, video duration]. ``repair_spans`` then resolves overlaps between
consecutive turns by truncating the earlier span's end to the later span's
start; a span forced to zero or negative length means the session cannot be
localized and is surfaced as a failure for QC to drop.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import Decimal

from .errors import ConfigError, LocalizationError
from .model import Session, SourceVideo, Span
from .times import fmt_seconds

GAP_FLAG_SECONDS = Decimal("10")


@dataclass(frozen=True)
class LocalizationFlag:
    session_id: str
    turn_index: int
    kind: str
    detail: str

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "turn_index": self.turn_index,
            "kind": self.kind,
            "detail": self.detail,
        }


def _clip_span(start: Decimal, end: Decimal, duration: Decimal, what: str) -> Span:
    start = max(start, Decimal(0))
    end = min(end, duration)
    if end <= start:
        raise LocalizationError(f"{what}: span empty after clipping to [0, {duration}]")
    return (start, end)


def localize_from_annotations(
    session: Session,
    source: SourceVideo,
    *,
    gap_seconds: Decimal = GAP_FLAG_SECONDS,
) -> tuple[Session, list[LocalizationFlag]]:
    """Fill spans from annotation timestamps; returns (session, gap flags)."""
    flags: list[LocalizationFlag] = []
    turns = []
    for turn in session.turns:
        step = session.instructions.steps[turn.step_index]
        spans = sorted(step.source_spans)
        if not spans:
            raise LocalizationError(
                f"session {session.id!r}: step {step.index} has no source spans"
            )
        for before, after in zip(spans, spans[1:]):
            gap = after[0] - before[1]
            if gap > gap_seconds:
                flags.append(
                    LocalizationFlag(
                        session_id=session.id,
                        turn_index=turn.index,
                        kind="gap_spanning",
                        detail=f"merged step spans a {fmt_seconds(gap)}s interior gap",
                    )
                )
        span = _clip_span(
            min(s[0] for s in spans),
            max(s[1] for s in spans),
            source.duration,
            f"session {session.id!r} turn {turn.index}",
        )
        turns.append(replace(turn, video_span=span))
    return replace(session, turns=tuple(turns)), flags


def localize_from_subtitles(session: Session, source: SourceVideo) -> Session:
    """Fill spans from the step intervals inferred during instruction formation."""
    turns = []
    for turn in session.turns:
        step = session.instructions.steps[turn.step_index]
        if not step.source_spans:
            raise LocalizationError(
                f"session {session.id!r}: step {step.index} has no source spans"
            )
        span = _clip_span(
            min(s[0] for s in step.source_spans),
            max(s[1] for s in step.source_spans),
            source.duration,
            f"session {session.id!r} turn {turn.index}",
        )
        turns.append(replace(turn, video_span=span))
    return replace(session, turns=tuple(turns))


def repair_spans(session: Session) -> Session:
    """Resolve overlaps between consecutive turns; reject unrepairable layouts."""
    if any(t.video_span is None for t in session.turns):
        raise ValueError(f"session {session.id!r} has unlocalized turns; fill spans first")
    spans = [t.video_span for t in session.turns]
    for i in range(len(spans) - 1):
        if spans[i][1] > spans[i + 1][0]:
            spans[i] = (spans[i][0], spans[i + 1][0])
    for i, (start, end) in enumerate(spans):
        if end <= start:
            raise LocalizationError(
                f"session {session.id!r}: turn {i} span collapsed to zero length during repair"
            )
        if i + 1 < len(spans) and end > spans[i + 1][0]:
            raise LocalizationError(
                f"session {session.id!r}: turns {i} and {i + 1} still overlap after repair"
            )
    turns = tuple(
        replace(turn, video_span=span) for turn, span in zip(session.turns, spans)
    )
    return replace(session, turns=turns)


def is_repaired(session: Session) -> bool:
    spans = [t.video_span for t in session.turns]
    if any(s is None for s in spans):
        return False
    if any(end <= start for start, end in spans):
        return False
    return all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))


@dataclass(frozen=True)
class ClipJob:
    session_id: str
    turn_index: int
    source_uri: str
    t_start: Decimal
    t_end: Decimal
    output_path: str
    command: str

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "turn_index": self.turn_index,
            "source_uri": self.source_uri,
            "t_start": fmt_seconds(self.t_start),
            "t_end": fmt_seconds(self.t_end),
            "output_path": self.output_path,
            "command": self.command,
        }


def emit_clip_jobs(session: Session, source: SourceVideo, tool_template: str) -> list[ClipJob]:
    """One externally executable cut command per turn; nothing runs in-process.

    The template must use all of the {src} {start} {end} {out} placeholders.
    """
    if not tool_template:
        raise ConfigError("clip tool template is missing")
    for placeholder in ("{src}", "{start}", "{end}", "{out}"):
        if placeholder not in tool_template:
            raise ConfigError(f"clip tool template lacks the {placeholder} placeholder")
    if not is_repaired(session):
        raise ValueError(f"session {session.id!r} spans are not repaired; run repair first")
    jobs = []
    for turn in session.turns:
        start, end = turn.video_span
        out = f"{session.id}/turn_{turn.index}"
        jobs.append(
            ClipJob(
                session_id=session.id,
                turn_index=turn.index,
                source_uri=source.uri,
                t_start=start,
                t_end=end,
                output_path=out,
                command=tool_template.format(
                    src=source.uri,
                    start=fmt_seconds(start),
                    end=fmt_seconds(end),
                    out=out,
                ),
            )
        )
    return jobs
