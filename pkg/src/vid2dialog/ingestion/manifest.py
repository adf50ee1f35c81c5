"""Manifest loading and source curation.

The manifest is one JSON file describing every candidate video: identity,
task, domain, duration, capture perspective, and where its subtitle track or
annotation table lives (paths relative to the manifest file). Loading applies
the curation rules and returns the kept sources plus a report saying exactly
why each excluded source was dropped.

Curation rules:
- only egocentric sources are kept
- annotated sources whose declared error kinds include anything other than
  "modification" or "correction" are excluded (those labels mark observation
  noise we cannot turn into usable error turns)
- a missing subtitle or annotation file is a warning plus exclusion, not a
  hard failure, so one bad path does not sink a whole corpus
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ManifestError
from ..model import GENERATIVE_ERROR_KINDS, ERROR_KINDS, SourceVideo
from .annotations import AnnotationSchema


@dataclass(frozen=True)
class CuratedSource:
    video: SourceVideo
    subtitle_path: Path | None = None
    subtitle_format: str | None = None
    annotation_path: Path | None = None
    annotation_schema: AnnotationSchema | None = None
    include_errors: bool = True
    declared_error_kinds: tuple[str, ...] = ()


@dataclass
class IngestReport:
    included: list[str] = field(default_factory=list)
    excluded: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def exclude(self, source_id: str, reason: str) -> None:
        self.excluded.append({"id": source_id, "reason": reason})

    def to_dict(self) -> dict:
        return {
            "included": list(self.included),
            "excluded": list(self.excluded),
            "warnings": list(self.warnings),
        }


def _video_from_entry(entry: dict) -> SourceVideo:
    required = ("id", "task", "domain", "duration", "kind", "uri")
    missing = [key for key in required if key not in entry]
    if missing:
        raise ManifestError(
            f"source entry {entry.get('id', '<no id>')!r} is missing fields: {', '.join(missing)}"
        )
    try:
        return SourceVideo(
            id=str(entry["id"]),
            task=str(entry["task"]),
            domain=str(entry["domain"]),
            duration=entry["duration"],
            kind=str(entry["kind"]),
            uri=str(entry["uri"]),
            egocentric=bool(entry.get("egocentric", True)),
            frame_count=entry.get("frame_count"),
        )
    except (ValueError, TypeError) as exc:
        raise ManifestError(f"source entry {entry['id']!r}: {exc}") from exc


def _schema_from_entry(columns: dict, table_format: str) -> AnnotationSchema:
    return AnnotationSchema(
        format=table_format,
        description=columns.get("description", "description"),
        start=columns.get("start", "start"),
        end=columns.get("end", "end"),
        error_kind=columns.get("error_kind"),
        correction=columns.get("correction"),
    )


def _curated_from_entry(entry: dict, base: Path) -> CuratedSource:
    video = _video_from_entry(entry)
    subtitle_path = subtitle_format = None
    annotation_path = annotation_schema = None
    if video.kind == "narrated":
        block = entry.get("subtitles")
        if not isinstance(block, dict) or "path" not in block:
            raise ManifestError(f"narrated source {video.id!r} needs a subtitles block with a path")
        subtitle_path = base / str(block["path"])
        subtitle_format = str(block.get("format", Path(str(block["path"])).suffix.lstrip(".")))
        if subtitle_format not in ("srt", "vtt"):
            raise ManifestError(
                f"source {video.id!r}: unknown subtitle format {subtitle_format!r}"
            )
    else:
        block = entry.get("annotations")
        if not isinstance(block, dict) or "path" not in block:
            raise ManifestError(
                f"annotated source {video.id!r} needs an annotations block with a path"
            )
        annotation_path = base / str(block["path"])
        table_format = str(block.get("format", Path(str(block["path"])).suffix.lstrip(".")))
        annotation_schema = _schema_from_entry(block.get("columns", {}), table_format)
    declared = tuple(str(k).strip().lower() for k in entry.get("errors", ()))
    for kind in declared:
        if kind not in ERROR_KINDS:
            raise ManifestError(
                f"source {video.id!r} declares unknown error kind {kind!r}; accepted kinds are "
                + ", ".join(ERROR_KINDS)
            )
    return CuratedSource(
        video=video,
        subtitle_path=subtitle_path,
        subtitle_format=subtitle_format,
        annotation_path=annotation_path,
        annotation_schema=annotation_schema,
        include_errors=bool(entry.get("include_errors", True)),
        declared_error_kinds=declared,
    )


def load_manifest(path: str | Path) -> tuple[list[CuratedSource], IngestReport]:
    path = Path(path)
    try:
        data = json.loads(path.read_text("utf-8"))
    except FileNotFoundError:
        raise ManifestError(f"manifest file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc.msg} (line {exc.lineno})") from exc
    if not isinstance(data, dict) or not isinstance(data.get("sources"), list):
        raise ManifestError("manifest must be an object with a 'sources' array")

    report = IngestReport()
    kept: list[CuratedSource] = []
    seen: set[str] = set()
    for entry in data["sources"]:
        if not isinstance(entry, dict):
            raise ManifestError("every source entry must be an object")
        source = _curated_from_entry(entry, path.parent)
        video = source.video
        if video.id in seen:
            raise ManifestError(f"duplicate source id {video.id!r} in manifest")
        seen.add(video.id)

        if not video.egocentric:
            report.exclude(video.id, "not egocentric")
            continue
        bad_kinds = [k for k in source.declared_error_kinds if k not in GENERATIVE_ERROR_KINDS]
        if source.include_errors and bad_kinds:
            report.exclude(
                video.id,
                "declares error kinds outside the usable set "
                f"({', '.join(sorted(set(bad_kinds)))})",
            )
            continue
        sidecar = source.subtitle_path or source.annotation_path
        if sidecar is not None and not sidecar.exists():
            report.warnings.append(f"source {video.id!r}: referenced file missing: {sidecar}")
            report.exclude(video.id, "referenced sidecar file missing")
            continue
        kept.append(source)
        report.included.append(video.id)
    return kept, report
