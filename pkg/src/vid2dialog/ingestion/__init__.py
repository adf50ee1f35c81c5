"""Source ingestion: subtitle tracks, action-annotation tables, and the manifest."""

from .annotations import AnnotationSchema, parse_action_annotations
from .manifest import CuratedSource, IngestReport, load_manifest
from .subtitles import parse_subtitles, serialize_subtitles

__all__ = [
    "AnnotationSchema",
    "CuratedSource",
    "IngestReport",
    "load_manifest",
    "parse_action_annotations",
    "parse_subtitles",
    "serialize_subtitles",
]
