"""Dataset persistence, stratified splits, and corpus statistics.

On-disk format is newline-delimited JSON: a header record carrying the
schema version, then one session per line with keys in sorted order, so
identical session lists always serialize to identical bytes.

Splits are assigned per stratum (task crossed with user category) with
largest-remainder rounding, keyed by session id so the assignment is stable
under input reordering.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

from .errors import ConfigError, Vid2DialogError
from .model import Session, session_from_dict, session_to_dict, with_split

SCHEMA_VERSION = 1
SPLIT_NAMES = ("train", "val", "test")
DEFAULT_RATIOS = (0.7, 0.1, 0.2)
DEFAULT_STRATIFY_KEYS = ("task", "user_category")

_HISTOGRAM_EDGES = (5, 10, 30, 60, 120)


def dumps_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def write_sessions(sessions: list[Session], path: str | Path) -> None:
    path = Path(path)
    lines = [dumps_record({"schema_version": SCHEMA_VERSION, "sessions": len(sessions)})]
    lines.extend(dumps_record(session_to_dict(s)) for s in sessions)
    path.write_text("\n".join(lines) + "\n", "utf-8")


def read_sessions(path: str | Path) -> list[Session]:
    path = Path(path)
    if not path.exists():
        raise Vid2DialogError(f"missing {path}; run the producing stage first")
    with open(path, encoding="utf-8") as handle:
        header_line = handle.readline()
        if not header_line.strip():
            raise Vid2DialogError(f"{path}: missing header record")
        header = json.loads(header_line)
        version = header.get("schema_version")
        if version != SCHEMA_VERSION:
            raise Vid2DialogError(
                f"{path}: schema version {version!r} is not the supported {SCHEMA_VERSION}"
            )
        return [session_from_dict(json.loads(line)) for line in handle if line.strip()]


# ---------------------------------------------------------------------------
# splits


@dataclass
class SplitAssignment:
    by_id: dict[str, str]
    warnings: list[str] = field(default_factory=list)

    def counts(self) -> dict[str, int]:
        out = {name: 0 for name in SPLIT_NAMES}
        for split in self.by_id.values():
            out[split] += 1
        return out

    def to_dict(self) -> dict:
        return {"assignment": dict(sorted(self.by_id.items())), "warnings": self.warnings}


def largest_remainder(total: int, ratios: tuple[float, ...]) -> list[int]:
    """Integer apportionment: floors first, spare units to largest remainders."""
    exact = [total * r for r in ratios]
    counts = [int(x) for x in exact]
    spare = total - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:spare]:
        counts[i] += 1
    return counts


def _stratum_key(session: Session, keys: tuple[str, ...]) -> tuple[str, ...]:
    values = []
    for key in keys:
        if key == "task":
            values.append(session.instructions.task)
        elif key == "user_category":
            values.append(session.user_category)
        else:
            raise ValueError(f"unknown stratify key {key!r}")
    return tuple(values)


def make_splits(
    sessions: list[Session],
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
    stratify_keys: tuple[str, ...] = DEFAULT_STRATIFY_KEYS,
    seed: int = 0,
) -> SplitAssignment:
    if len(ratios) != len(SPLIT_NAMES):
        raise ConfigError(f"need {len(SPLIT_NAMES)} ratios, got {len(ratios)}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {sum(ratios)}")
    ids = [s.id for s in sessions]
    if len(set(ids)) != len(ids):
        raise Vid2DialogError("duplicate session ids in split input")

    strata: dict[tuple[str, ...], list[str]] = {}
    for session in sessions:
        strata.setdefault(_stratum_key(session, stratify_keys), []).append(session.id)

    assignment = SplitAssignment(by_id={})
    for key in sorted(strata):
        members = sorted(strata[key])
        if len(members) < len(SPLIT_NAMES):
            assignment.warnings.append(
                f"stratum {'/'.join(key)} has only {len(members)} session(s); assigned to train"
            )
            for sid in members:
                assignment.by_id[sid] = "train"
            continue
        # Per-stratum rng keyed by (seed, stratum) so adding a stratum never
        # reshuffles the others.
        digest = hashlib.sha256(f"{seed}|{'|'.join(key)}".encode("utf-8")).hexdigest()
        random.Random(int(digest[:16], 16)).shuffle(members)
        counts = largest_remainder(len(members), tuple(ratios))
        cursor = 0
        for split, count in zip(SPLIT_NAMES, counts):
            for sid in members[cursor : cursor + count]:
                assignment.by_id[sid] = split
            cursor += count
    return assignment


def apply_splits(sessions: list[Session], assignment: SplitAssignment) -> list[Session]:
    missing = [s.id for s in sessions if s.id not in assignment.by_id]
    if missing:
        raise Vid2DialogError(f"no split assigned for sessions: {', '.join(sorted(missing))}")
    return [with_split(s, assignment.by_id[s.id]) for s in sessions]


def write_split_assignment(assignment: SplitAssignment, path: str | Path) -> None:
    Path(path).write_text(json.dumps(assignment.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8")


def read_split_assignment(path: str | Path) -> SplitAssignment:
    data = json.loads(Path(path).read_text("utf-8"))
    return SplitAssignment(by_id=dict(data["assignment"]), warnings=list(data.get("warnings", [])))


# ---------------------------------------------------------------------------
# statistics


def _bucket_label(length: Decimal) -> str:
    low = 0
    for edge in _HISTOGRAM_EDGES:
        if length < edge:
            return f"{low}-{edge}s"
        low = edge
    return f"{_HISTOGRAM_EDGES[-1]}s+"


def _mean(values: list) -> float:
    return round(float(sum(values)) / len(values), 3) if values else 0.0


def _subset_stats(sessions: list[Session]) -> dict:
    turns = [t for s in sessions for t in s.turns]
    spans = [t.video_span for t in turns if t.video_span is not None]
    lengths = [end - start for start, end in spans]
    user_words = {
        style: [
            len(t.user_utterance.split())
            for s in sessions
            if s.speech_style == style
            for t in s.turns
        ]
        for style in ("concise", "regular")
    }
    histogram: dict[str, int] = {}
    for length in lengths:
        label = _bucket_label(length)
        histogram[label] = histogram.get(label, 0) + 1
    return {
        "sessions": len(sessions),
        "turns": len(turns),
        "video_hours": round(float(sum(lengths)) / 3600, 3) if lengths else 0.0,
        "mean_turns_per_session": _mean([len(s.turns) for s in sessions]),
        "mean_user_words": {style: _mean(words) for style, words in user_words.items()},
        "mean_expert_words": _mean([len(t.expert_response.split()) for t in turns]),
        "mean_clip_seconds": _mean(lengths),
        "clip_duration_histogram": dict(sorted(histogram.items())),
    }


def compute_statistics(sessions: list[Session]) -> dict:
    by_task: dict[str, list[Session]] = {}
    for session in sessions:
        by_task.setdefault(session.instructions.task, []).append(session)
    return {
        "overall": _subset_stats(list(sessions)),
        "by_task": {task: _subset_stats(group) for task, group in sorted(by_task.items())},
    }


def format_statistics(stats: dict) -> str:
    """Human-readable companion to the JSON report."""
    overall = stats["overall"]
    lines = [
        f"sessions:            {overall['sessions']}",
        f"turns:               {overall['turns']}",
        f"video hours:         {overall['video_hours']}",
        f"mean turns/session:  {overall['mean_turns_per_session']}",
        f"mean user words:     concise={overall['mean_user_words']['concise']} "
        f"regular={overall['mean_user_words']['regular']}",
        f"mean expert words:   {overall['mean_expert_words']}",
        f"mean clip seconds:   {overall['mean_clip_seconds']}",
        "",
        f"{'task':<32} {'sessions':>8} {'turns':>6} {'turns/sess':>10}",
    ]
    for task, sub in stats["by_task"].items():
        lines.append(
            f"{task:<32} {sub['sessions']:>8} {sub['turns']:>6} {sub['mean_turns_per_session']:>10}"
        )
    return "\n".join(lines)
