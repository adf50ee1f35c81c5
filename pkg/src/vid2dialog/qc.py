"""Quality control: automatic turn filters and the human-review protocol.

``qc_filter`` removes turns (never edits them) for five reasons, applied in
this order: duplicates, degenerate responses, length outliers, profanity,
failed temporal localization. Sessions left with fewer than three turns are
dropped whole. The filter is idempotent and the kept/removed sets partition
the input.

The review half implements the sampling sheet (two annotators, three binary
criteria per turn) and the usability rule: a turn is usable when each
annotator independently marks at least two criteria true.
"""

from __future__ import annotations

import csv
import random
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .errors import Vid2DialogError
from .model import Session
from .times import fmt_seconds

_TOKEN_RE = re.compile(r"[a-z0-9']+")

REVIEW_CRITERIA = ("instruction_correct", "dialogue_natural", "video_aligned")
ANNOTATORS = ("a1", "a2")
MIN_TURNS_PER_SESSION = 3


def load_profanity(path: str | None = None) -> frozenset[str]:
    if path is None:
        text = resources.files("vid2dialog").joinpath("data/profanity.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


@dataclass(frozen=True)
class QCConfig:
    max_user_words: int = 60
    max_expert_words: int = 120
    min_turns: int = MIN_TURNS_PER_SESSION
    profanity: frozenset[str] = field(default_factory=load_profanity)


@dataclass(frozen=True)
class Removal:
    session_id: str
    turn_index: int | None  # None marks a whole-session removal entry
    filter: str
    evidence: str

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "turn_index": self.turn_index,
            "filter": self.filter,
            "evidence": self.evidence,
        }


@dataclass
class QCResult:
    kept: list[Session]
    removals: list[Removal]

    @property
    def removed_turn_count(self) -> int:
        return sum(1 for r in self.removals if r.turn_index is not None)


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _normalized(text: str) -> str:
    return " ".join(_tokens(text))


def _degenerate_reason(text: str) -> str | None:
    tokens = _tokens(text)
    if not tokens:
        return "empty response"
    if len(tokens) == 1:
        return f"single-token response {tokens[0]!r}"
    counts: dict[str, int] = {}
    for tok in tokens:
        counts[tok] = counts.get(tok, 0) + 1
    top_token = max(counts, key=counts.get)
    if counts[top_token] >= 3 and counts[top_token] * 2 >= len(tokens):
        return f"token {top_token!r} repeats {counts[top_token]} times over {len(tokens)} tokens"
    return None


def _turn_verdict(turn, config, session_seen: set, corpus_seen: set) -> tuple[str, str] | None:
    """Return (filter, evidence) for a removable turn, else None."""
    expert_norm = _normalized(turn.expert_response)
    pair_norm = (_normalized(turn.user_utterance), expert_norm)
    if expert_norm in session_seen:
        return "duplicate", "expert response repeats an earlier turn in this session"
    if pair_norm in corpus_seen:
        return "duplicate", "user/expert pair repeats another turn in the corpus"
    reason = _degenerate_reason(turn.expert_response)
    if reason:
        return "degenerate", reason
    user_words = len(turn.user_utterance.split())
    expert_words = len(turn.expert_response.split())
    if user_words > config.max_user_words:
        return "length", f"user utterance has {user_words} words (limit {config.max_user_words})"
    if expert_words > config.max_expert_words:
        return "length", f"expert response has {expert_words} words (limit {config.max_expert_words})"
    hits = (set(_tokens(turn.user_utterance)) | set(_tokens(turn.expert_response))) & config.profanity
    if hits:
        return "profanity", f"matched wordlist entries: {', '.join(sorted(hits))}"
    if turn.video_span is None:
        return "failed_localization", "turn has no video span"
    return None


def qc_filter(sessions: list[Session], config: QCConfig | None = None) -> QCResult:
    if config is None:
        config = QCConfig()
    kept: list[Session] = []
    removals: list[Removal] = []
    corpus_seen: set[tuple[str, str]] = set()
    for session in sorted(sessions, key=lambda s: s.id):
        session_seen: set[str] = set()
        surviving = []
        for turn in session.turns:
            verdict = _turn_verdict(turn, config, session_seen, corpus_seen)
            if verdict is not None:
                removals.append(Removal(session.id, turn.index, verdict[0], verdict[1]))
                continue
            session_seen.add(_normalized(turn.expert_response))
            corpus_seen.add((_normalized(turn.user_utterance), _normalized(turn.expert_response)))
            surviving.append(turn)
        if len(surviving) < config.min_turns:
            for turn in surviving:
                removals.append(
                    Removal(session.id, turn.index, "below_turn_floor", "session dropped")
                )
            removals.append(
                Removal(
                    session.id,
                    None,
                    "below_turn_floor",
                    f"{len(surviving)} turns left (floor {config.min_turns})",
                )
            )
            continue
        kept.append(replace(session, turns=tuple(surviving)))
    return QCResult(kept=kept, removals=removals)


# ---------------------------------------------------------------------------
# human review protocol


def _review_columns() -> list[str]:
    return [f"{who}_{crit}" for who in ANNOTATORS for crit in REVIEW_CRITERIA]


def sample_for_review(sessions: list[Session], n: int, seed: int) -> list[dict]:
    """Uniform seeded sample of turns, one sheet row each, labels left blank."""
    if not sessions:
        raise ValueError("dataset is empty")
    if n < 0:
        raise ValueError("sample size must be >= 0")
    pool = [
        (session, turn)
        for session in sorted(sessions, key=lambda s: s.id)
        for turn in session.turns
    ]
    if n > len(pool):
        raise ValueError(f"asked for {n} turns but the dataset has only {len(pool)}")
    chosen = random.Random(seed).sample(pool, n)
    rows = []
    for session, turn in chosen:
        span = turn.video_span
        row = {
            "session_id": session.id,
            "turn_index": turn.index,
            "task": session.instructions.task,
            "step_text": session.instructions.steps[turn.step_index].text,
            "user_utterance": turn.user_utterance,
            "expert_response": turn.expert_response,
            "video_span": "" if span is None else f"{fmt_seconds(span[0])}-{fmt_seconds(span[1])}",
        }
        for column in _review_columns():
            row[column] = ""
        rows.append(row)
    return rows


def write_review_sheet(rows: list[dict], path: str | Path) -> None:
    columns = [
        "session_id",
        "turn_index",
        "task",
        "step_text",
        "user_utterance",
        "expert_response",
        "video_span",
        *_review_columns(),
    ]
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def read_review_sheet(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


@dataclass(frozen=True)
class ReviewSummary:
    total: int
    usable: int

    @property
    def usable_fraction(self) -> float:
        return self.usable / self.total if self.total else 0.0


def score_review(rows: list[dict]) -> ReviewSummary:
    """Usable ⇔ each annotator marks at least 2 of the 3 criteria true."""
    incomplete = []
    usable = 0
    for row in rows:
        key = f"{row.get('session_id', '?')}/{row.get('turn_index', '?')}"
        values: dict[str, list[int]] = {who: [] for who in ANNOTATORS}
        ok = True
        for who in ANNOTATORS:
            for crit in REVIEW_CRITERIA:
                raw = str(row.get(f"{who}_{crit}", "")).strip()
                if raw not in ("0", "1"):
                    ok = False
                else:
                    values[who].append(int(raw))
        if not ok:
            incomplete.append(key)
            continue
        if all(sum(values[who]) >= 2 for who in ANNOTATORS):
            usable += 1
    if incomplete:
        raise Vid2DialogError(
            "review sheet has unlabeled or non-binary rows: " + ", ".join(incomplete)
        )
    return ReviewSummary(total=len(rows), usable=usable)
