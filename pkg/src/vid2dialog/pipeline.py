"""Stage orchestration shared by the CLI subcommands.

Each stage reads its input artifact from the run directory, writes its output
plus a stage report, and records a run manifest (config hash, seed, prompt
catalog version, backend identity) so every artifact is attributable. The
``pipeline`` entry composes the same stage functions in order, which is what
makes stage-by-stage runs and one-shot runs byte-identical.

Artifacts are written to ``<name>.partial`` first and renamed into place on
success, so an interrupted stage leaves its partial output visible.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import __version__
from .dialogue import generate_dialogue, generate_variants
from .errors import (
    LocalizationError,
    StageError,
    StructuredOutputError,
    Vid2DialogError,
)
from .gateway import catalog_version
from .ingestion import CuratedSource, load_manifest, parse_action_annotations, parse_subtitles
from .instructions import form_from_annotations, form_from_transcript, load_stoplist
from .localize import emit_clip_jobs, localize_from_annotations, localize_from_subtitles, repair_spans
from .model import (
    ActionAnnotation,
    ErrorLabel,
    InstructionList,
    SamplingConfig,
    Session,
    SourceVideo,
    SubtitleSegment,
    SubtitleTrack,
    instructions_from_dict,
    instructions_to_dict,
    session_to_dict,
    validate_session,
)
from .qc import QCConfig, load_profanity, qc_filter
from .store import SCHEMA_VERSION, dumps_record, read_sessions, write_sessions
from .times import fmt_seconds

ARTIFACTS = {
    "sources": "sources.json",
    "ingest_report": "ingest_report.json",
    "instructions": "instructions.jsonl",
    "instruct_report": "instruct_report.json",
    "sessions_raw": "sessions_raw.jsonl",
    "dialogue_report": "dialogue_report.json",
    "sessions_localized": "sessions_localized.jsonl",
    "localization_report": "localization_report.json",
    "dataset": "dataset.jsonl",
    "qc_removals": "qc_removals.jsonl",
    "clip_jobs": "clip_jobs.jsonl",
    "splits": "splits.json",
    "stats": "stats.json",
    "stats_text": "stats.txt",
}


def derive_seed(seed: int, *parts: object) -> int:
    """Stable per-source seed stream; changing the base seed moves every stream."""
    blob = "|".join([str(seed), *map(str, parts)])
    digest = hashlib.sha256(blob.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def atomic_write(path: Path, text: str) -> None:
    partial = path.with_name(path.name + ".partial")
    partial.write_text(text, "utf-8")
    os.replace(partial, path)


class _StreamWriter:
    """Line-oriented artifact writer; leaves a .partial file if never closed."""

    def __init__(self, path: Path) -> None:
        self.path = path
        self.partial = path.with_name(path.name + ".partial")
        self.handle = open(self.partial, "w", encoding="utf-8")

    def line(self, text: str) -> None:
        self.handle.write(text + "\n")
        self.handle.flush()

    def close(self) -> None:
        self.handle.close()
        os.replace(self.partial, self.path)

    def abandon(self) -> None:
        self.handle.close()


def write_run_manifest(out_dir: Path, stage: str, config: dict, backend_id: str | None) -> None:
    manifest_dir = out_dir / "manifests"
    manifest_dir.mkdir(parents=True, exist_ok=True)
    config_blob = json.dumps(config, sort_keys=True, ensure_ascii=False, default=str)
    record = {
        "stage": stage,
        "config_sha256": hashlib.sha256(config_blob.encode("utf-8")).hexdigest(),
        "seed": config.get("seed"),
        "prompt_catalog_version": catalog_version(),
        "backend_id": backend_id,
        "package_version": __version__,
    }
    atomic_write(manifest_dir / f"{stage}.json", json.dumps(record, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# parsed-source artifact


@dataclass(frozen=True)
class ParsedSource:
    video: SourceVideo
    track: SubtitleTrack | None = None
    annotations: tuple[ActionAnnotation, ...] | None = None

    def to_dict(self) -> dict:
        data: dict = {
            "video": {
                "id": self.video.id,
                "task": self.video.task,
                "domain": self.video.domain,
                "duration": fmt_seconds(self.video.duration),
                "kind": self.video.kind,
                "uri": self.video.uri,
                "egocentric": self.video.egocentric,
                "frame_count": self.video.frame_count,
            },
            "track": None,
            "annotations": None,
        }
        if self.track is not None:
            data["track"] = [
                {"text": s.text, "t_start": fmt_seconds(s.t_start), "t_end": fmt_seconds(s.t_end)}
                for s in self.track.segments
            ]
        if self.annotations is not None:
            data["annotations"] = [
                {
                    "description": a.description,
                    "t_start": fmt_seconds(a.t_start),
                    "t_end": fmt_seconds(a.t_end),
                    "error": None
                    if a.error is None
                    else {"kind": a.error.kind, "corrective_action": a.error.corrective_action},
                }
                for a in self.annotations
            ]
        return data

    @staticmethod
    def from_dict(data: dict) -> "ParsedSource":
        video = SourceVideo(**data["video"])
        track = None
        if data.get("track") is not None:
            track = SubtitleTrack(
                segments=tuple(SubtitleSegment(**seg) for seg in data["track"])
            )
        annotations = None
        if data.get("annotations") is not None:
            annotations = tuple(
                ActionAnnotation(
                    description=row["description"],
                    t_start=row["t_start"],
                    t_end=row["t_end"],
                    error=None
                    if row.get("error") is None
                    else ErrorLabel(
                        kind=row["error"]["kind"],
                        corrective_action=row["error"].get("corrective_action"),
                    ),
                )
                for row in data["annotations"]
            )
        return ParsedSource(video=video, track=track, annotations=annotations)


def _parse_source(curated: CuratedSource) -> ParsedSource:
    video = curated.video
    if curated.subtitle_path is not None:
        track = parse_subtitles(curated.subtitle_path.read_bytes(), curated.subtitle_format)
        return ParsedSource(video=video, track=track)
    annotations = parse_action_annotations(
        curated.annotation_path.read_bytes(), curated.annotation_schema
    )
    if not curated.include_errors:
        annotations = [replace(a, error=None) for a in annotations]
    return ParsedSource(video=video, annotations=tuple(annotations))


def stage_ingest(manifest_path: str | Path, out_dir: Path) -> list[ParsedSource]:
    curated, report = load_manifest(manifest_path)
    parsed = sorted((_parse_source(c) for c in curated), key=lambda p: p.video.id)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "sources": [p.to_dict() for p in parsed],
    }
    atomic_write(out_dir / ARTIFACTS["sources"], json.dumps(payload, indent=2, sort_keys=True) + "\n")
    atomic_write(
        out_dir / ARTIFACTS["ingest_report"],
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
    )
    return parsed


def read_sources(out_dir: Path) -> list[ParsedSource]:
    path = out_dir / ARTIFACTS["sources"]
    if not path.exists():
        raise Vid2DialogError(f"missing {path}; run the ingest stage first")
    data = json.loads(path.read_text("utf-8"))
    if data.get("schema_version") != SCHEMA_VERSION:
        raise Vid2DialogError(
            f"{path}: schema version {data.get('schema_version')!r} "
            f"is not the supported {SCHEMA_VERSION}"
        )
    return [ParsedSource.from_dict(entry) for entry in data["sources"]]


# ---------------------------------------------------------------------------
# stage 1: instruction formation


def stage_instruct(
    sources: list[ParsedSource],
    backend,
    seed: int,
    out_dir: Path,
    *,
    stoplist_path: str | None = None,
    max_words: int = 25,
    temperature: float = 1.5,
    top_p: float = 0.9,
    jobs: int = 1,
) -> dict[str, InstructionList]:
    stoplist = load_stoplist(stoplist_path)
    failures: list[dict] = []

    def form(source: ParsedSource) -> InstructionList | Exception:
        try:
            if source.track is not None:
                sampling = SamplingConfig(
                    seed=derive_seed(seed, "instruct", source.video.id),
                    temperature=temperature,
                    top_p=top_p,
                )
                return form_from_transcript(
                    source.track, source.video.task, backend, sampling, max_words=max_words
                )
            return form_from_annotations(
                list(source.annotations), source.video.task, stoplist=stoplist
            )
        except (StageError, StructuredOutputError, ValueError) as exc:
            return exc

    writer = _StreamWriter(out_dir / ARTIFACTS["instructions"])
    results: dict[str, InstructionList] = {}
    try:
        writer.line(dumps_record({"schema_version": SCHEMA_VERSION, "artifact": "instructions"}))
        with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
            for source, outcome in zip(sources, pool.map(form, sources)):
                if isinstance(outcome, Exception):
                    failures.append({"source_id": source.video.id, "error": str(outcome)})
                    continue
                results[source.video.id] = outcome
                writer.line(
                    dumps_record(
                        {
                            "source_id": source.video.id,
                            "kind": source.video.kind,
                            "instructions": instructions_to_dict(outcome),
                        }
                    )
                )
        writer.close()
    except BaseException:
        writer.abandon()
        raise
    atomic_write(
        out_dir / ARTIFACTS["instruct_report"],
        json.dumps({"failures": failures}, indent=2, sort_keys=True) + "\n",
    )
    return results


def read_instructions(out_dir: Path) -> dict[str, InstructionList]:
    path = out_dir / ARTIFACTS["instructions"]
    if not path.exists():
        raise Vid2DialogError(f"missing {path}; run the instruct stage first")
    results: dict[str, InstructionList] = {}
    with open(path, encoding="utf-8") as handle:
        header = json.loads(handle.readline())
        if header.get("schema_version") != SCHEMA_VERSION:
            raise Vid2DialogError(f"{path}: unsupported schema version")
        for line in handle:
            if line.strip():
                record = json.loads(line)
                results[record["source_id"]] = instructions_from_dict(record["instructions"])
    return results


# ---------------------------------------------------------------------------
# stage 2: dialogue generation


def stage_dialogue(
    sources: list[ParsedSource],
    instruction_lists: dict[str, InstructionList],
    backend,
    seed: int,
    out_dir: Path,
    *,
    clarification_rate: float = 0.3,
    temperature: float = 1.5,
    top_p: float = 0.9,
    jobs: int = 1,
) -> list[Session]:
    failures: list[dict] = []
    with_lists = [s for s in sources if s.video.id in instruction_lists]

    def write_sessions_for(source: ParsedSource) -> list[Session] | Exception:
        instructions = instruction_lists[source.video.id]
        sampling = SamplingConfig(
            seed=derive_seed(seed, "dialogue", source.video.id),
            temperature=temperature,
            top_p=top_p,
        )
        try:
            if source.video.kind == "annotated":
                return generate_variants(
                    instructions,
                    sampling,
                    backend,
                    source_id=source.video.id,
                    clarification_rate=clarification_rate,
                )
            return [
                generate_dialogue(
                    instructions,
                    "regular",
                    sampling,
                    backend,
                    source_id=source.video.id,
                    clarification_rate=clarification_rate,
                )
            ]
        except (StageError, StructuredOutputError) as exc:
            return exc

    sessions: list[Session] = []
    writer = _StreamWriter(out_dir / ARTIFACTS["sessions_raw"])
    try:
        with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
            outcomes = list(zip(with_lists, pool.map(write_sessions_for, with_lists)))
        produced: list[Session] = []
        for source, outcome in outcomes:
            if isinstance(outcome, Exception):
                failures.append({"source_id": source.video.id, "error": str(outcome)})
                continue
            produced.extend(outcome)
        produced.sort(key=lambda s: s.id)
        writer.line(dumps_record({"schema_version": SCHEMA_VERSION, "sessions": len(produced)}))
        for session in produced:
            writer.line(dumps_record(session_to_dict(session)))
            sessions.append(session)
        writer.close()
    except BaseException:
        writer.abandon()
        raise
    atomic_write(
        out_dir / ARTIFACTS["dialogue_report"],
        json.dumps({"failures": failures}, indent=2, sort_keys=True) + "\n",
    )
    return sessions


# ---------------------------------------------------------------------------
# stage 3: localization


def stage_localize(
    sessions: list[Session],
    sources: list[ParsedSource],
    out_dir: Path,
) -> list[Session]:
    videos = {s.video.id: s.video for s in sources}
    flags: list[dict] = []
    failures: list[dict] = []
    localized: list[Session] = []
    for session in sorted(sessions, key=lambda s: s.id):
        video = videos.get(session.source)
        if video is None:
            failures.append({"session_id": session.id, "error": "unknown source video"})
            localized.append(session)
            continue
        try:
            if video.kind == "annotated":
                placed, gap_flags = localize_from_annotations(session, video)
                flags.extend(f.to_dict() for f in gap_flags)
            else:
                placed = localize_from_subtitles(session, video)
            localized.append(repair_spans(placed))
        except LocalizationError as exc:
            # Keep the session, spans unfilled: QC drops it and records why.
            failures.append({"session_id": session.id, "error": str(exc)})
            localized.append(session)
    write_sessions(localized, out_dir / ARTIFACTS["sessions_localized"])
    atomic_write(
        out_dir / ARTIFACTS["localization_report"],
        json.dumps({"flags": flags, "failures": failures}, indent=2, sort_keys=True) + "\n",
    )
    return localized


# ---------------------------------------------------------------------------
# QC


def stage_qc(
    sessions: list[Session],
    out_dir: Path,
    *,
    max_user_words: int = 60,
    max_expert_words: int = 120,
    min_turns: int = 3,
    profanity_path: str | None = None,
) -> list[Session]:
    config = QCConfig(
        max_user_words=max_user_words,
        max_expert_words=max_expert_words,
        min_turns=min_turns,
        profanity=load_profanity(profanity_path),
    )
    result = qc_filter(sessions, config)
    # Sessions QC did not touch must still satisfy every dataset invariant.
    # Sessions that lost turns keep their original indices for provenance and
    # are exempt from the bijection check by construction.
    invalid = [
        (s.id, problems)
        for s in result.kept
        if len(s.turns) == len(s.instructions.steps)
        and (problems := validate_session(s, spans_required=True))
    ]
    if invalid:
        details = "; ".join(f"{sid}: {', '.join(problems)}" for sid, problems in invalid)
        raise StageError(f"QC kept sessions violating dataset invariants: {details}")
    write_sessions(result.kept, out_dir / ARTIFACTS["dataset"])
    writer = _StreamWriter(out_dir / ARTIFACTS["qc_removals"])
    try:
        writer.line(dumps_record({"schema_version": SCHEMA_VERSION, "removals": len(result.removals)}))
        for removal in result.removals:
            writer.line(dumps_record(removal.to_dict()))
        writer.close()
    except BaseException:
        writer.abandon()
        raise
    return result.kept


# ---------------------------------------------------------------------------
# post-dataset stages


def stage_clipjobs(sessions: list[Session], sources: list[ParsedSource], tool_template: str, out_dir: Path) -> int:
    videos = {s.video.id: s.video for s in sources}
    writer = _StreamWriter(out_dir / ARTIFACTS["clip_jobs"])
    count = 0
    try:
        writer.line(dumps_record({"schema_version": SCHEMA_VERSION, "artifact": "clip_jobs"}))
        for session in sorted(sessions, key=lambda s: s.id):
            video = videos.get(session.source)
            if video is None:
                raise Vid2DialogError(f"session {session.id!r} references unknown source")
            for job in emit_clip_jobs(session, video, tool_template):
                writer.line(dumps_record(job.to_dict()))
                count += 1
        writer.close()
    except BaseException:
        writer.abandon()
        raise
    return count


def run_pipeline(
    manifest_path: str | Path,
    backend,
    seed: int,
    out_dir: Path,
    *,
    stage_options: dict | None = None,
    jobs: int = 1,
) -> list[Session]:
    """ingest → instruct → dialogue → localize → qc, one seed end to end."""
    options = stage_options or {}
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sources = stage_ingest(manifest_path, out_dir)
    instruction_lists = stage_instruct(
        sources, backend, seed, out_dir, jobs=jobs, **options.get("instruct", {})
    )
    raw_sessions = stage_dialogue(
        sources, instruction_lists, backend, seed, out_dir, jobs=jobs, **options.get("dialogue", {})
    )
    localized = stage_localize(raw_sessions, sources, out_dir)
    return stage_qc(localized, out_dir, **options.get("qc", {}))


def read_dataset(out_dir: Path) -> list[Session]:
    path = out_dir / ARTIFACTS["dataset"]
    if not path.exists():
        raise Vid2DialogError(f"missing {path}; run the qc stage (or pipeline) first")
    return read_sessions(path)
