"""Action-annotation table parser (CSV, TSV, or a JSON array of rows).

Column names vary between annotation tools, so each source declares a small
schema mapping our field names to its column names. Rows come back as
``ActionAnnotation`` values sorted by start time, with the full error
taxonomy preserved; deciding which error kinds drive generation happens
downstream, not here.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

from ..errors import ParseError, SchemaError
from ..model import ERROR_KINDS, ActionAnnotation, ErrorLabel
from ..times import seconds

TABLE_FORMATS = ("csv", "tsv", "json")


@dataclass(frozen=True)
class AnnotationSchema:
    """Maps annotation fields to the source table's column names."""

    format: str = "csv"
    description: str = "description"
    start: str = "start"
    end: str = "end"
    error_kind: str | None = None
    correction: str | None = None

    def __post_init__(self) -> None:
        if self.format not in TABLE_FORMATS:
            raise SchemaError(
                f"unknown annotation table format {self.format!r}; expected one of {TABLE_FORMATS}"
            )


def _rows(raw: bytes | str, schema: AnnotationSchema) -> list[dict]:
    if isinstance(raw, bytes):
        text = raw.decode("utf-8-sig")
    else:
        text = raw.lstrip("﻿")
    if schema.format == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"annotation JSON did not parse: {exc.msg}", line=exc.lineno) from exc
        if not isinstance(data, list) or not all(isinstance(r, dict) for r in data):
            raise SchemaError("annotation JSON must be an array of objects")
        return data
    delimiter = "\t" if schema.format == "tsv" else ","
    reader = csv.DictReader(io.StringIO(text), delimiter=delimiter)
    return list(reader)


def _required(row: dict, column: str, row_no: int) -> str:
    if column not in row or row[column] is None:
        raise SchemaError(f"row {row_no}: missing required column {column!r}")
    return str(row[column])


def _error_label(row: dict, schema: AnnotationSchema, row_no: int) -> ErrorLabel | None:
    if not schema.error_kind:
        return None
    kind = str(row.get(schema.error_kind) or "").strip().lower()
    if not kind:
        return None
    if kind not in ERROR_KINDS:
        raise SchemaError(
            f"row {row_no}: unknown error kind {kind!r}; accepted kinds are "
            + ", ".join(ERROR_KINDS)
        )
    correction = None
    if schema.correction:
        correction = str(row.get(schema.correction) or "").strip() or None
    return ErrorLabel(kind=kind, corrective_action=correction)


def parse_action_annotations(raw: bytes | str, schema: AnnotationSchema) -> list[ActionAnnotation]:
    rows = _rows(raw, schema)
    if not rows:
        raise ParseError("annotation table has no rows")
    annotations: list[ActionAnnotation] = []
    # Row numbers are 1-based over data rows; the header is not counted.
    for row_no, row in enumerate(rows, start=1):
        description = _required(row, schema.description, row_no).strip()
        if not description:
            raise ParseError("empty action description", line=row_no)
        start_text = _required(row, schema.start, row_no).strip()
        end_text = _required(row, schema.end, row_no).strip()
        try:
            t_start = seconds(start_text)
            t_end = seconds(end_text)
        except (ValueError, TypeError) as exc:
            raise ParseError(f"bad time value ({start_text!r}, {end_text!r})", line=row_no) from exc
        if t_start < 0 or t_end <= t_start:
            raise ParseError(
                f"action interval [{start_text}, {end_text}] is empty or negative", line=row_no
            )
        annotations.append(
            ActionAnnotation(
                description=description,
                t_start=t_start,
                t_end=t_end,
                error=_error_label(row, schema, row_no),
            )
        )
    annotations.sort(key=lambda a: (a.t_start, a.t_end))
    return annotations
