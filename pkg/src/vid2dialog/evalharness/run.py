"""Collect candidate responses, score them, judge them, and aggregate.

Turn evaluations are independent; everything aggregates as an equal-weight
mean per turn, with breakdowns by user category, task, and turn index, plus
a judge-score histogram. The report rows carry one method label against the
five headline metrics so side-by-side method tables fall out directly.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from ..errors import Vid2DialogError
from ..gateway import request_fingerprint
from ..model import Session
from .judge import JudgeError, JudgeVerdict, judge
from .metrics import bleu, rouge
from .prompts import PromptConfig, build_prompt

HEADLINE_METRICS = ("bleu", "llm_judge", "rouge1", "rouge2", "rougeL")


@dataclass(frozen=True)
class CandidateRecord:
    session_id: str
    turn_index: int
    prompt_sha: str
    candidate: str

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "turn_index": self.turn_index,
            "prompt_sha": self.prompt_sha,
            "candidate": self.candidate,
        }


def generate_candidates(
    sessions: list[Session], backend, config: PromptConfig
) -> list[CandidateRecord]:
    records = []
    for session in sorted(sessions, key=lambda s: s.id):
        for turn in session.turns:
            request = build_prompt(session, turn.index, config)
            response = backend.complete(request)
            records.append(
                CandidateRecord(
                    session_id=session.id,
                    turn_index=turn.index,
                    prompt_sha=request_fingerprint(request),
                    candidate=response.text,
                )
            )
    return records


def _turn_lookup(sessions: list[Session]) -> dict:
    return {
        (session.id, turn.index): (session, turn)
        for session in sessions
        for turn in session.turns
    }


def score_candidates(records: list[CandidateRecord], sessions: list[Session]) -> list[dict]:
    """Per-turn metric rows; candidates are scored against the stored expert turn."""
    lookup = _turn_lookup(sessions)
    rows = []
    for record in records:
        key = (record.session_id, record.turn_index)
        if key not in lookup:
            raise Vid2DialogError(f"candidate references unknown turn {key}")
        session, turn = lookup[key]
        scores = rouge(record.candidate, turn.expert_response)
        rows.append(
            {
                "session_id": record.session_id,
                "turn_index": record.turn_index,
                "task": session.instructions.task,
                "user_category": session.user_category,
                "bleu": bleu(record.candidate, turn.expert_response),
                **scores,
            }
        )
    return rows


def run_judge(
    records: list[CandidateRecord],
    sessions: list[Session],
    judge_backend,
    seed: int,
) -> tuple[list[JudgeVerdict], int]:
    """Judge every candidate; returns (verdicts, judging-error count)."""
    lookup = _turn_lookup(sessions)
    rng = random.Random(seed)
    verdicts = []
    errors = 0
    for record in sorted(records, key=lambda r: (r.session_id, r.turn_index)):
        key = (record.session_id, record.turn_index)
        if key not in lookup:
            raise Vid2DialogError(f"candidate references unknown turn {key}")
        session, turn = lookup[key]
        try:
            verdicts.append(
                judge(
                    session.instructions.task,
                    turn.user_utterance,
                    turn.expert_response,
                    record.candidate,
                    rng,
                    judge_backend,
                    session_id=record.session_id,
                    turn_index=record.turn_index,
                )
            )
        except JudgeError:
            errors += 1
    return verdicts, errors


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _metric_means(rows: list[dict]) -> dict:
    return {
        metric: _mean([row[metric] for row in rows])
        for metric in ("bleu", "rouge1", "rouge2", "rougeL")
    }


def aggregate(
    rows: list[dict],
    verdicts: list[JudgeVerdict] | None = None,
    judge_errors: int = 0,
    method: str = "candidate",
) -> dict:
    """MetricReport: overall means plus category/task/turn-index breakdowns."""
    if not rows:
        raise Vid2DialogError("no per-turn results to aggregate")
    overall = _metric_means(rows)
    by_category: dict[str, list[dict]] = {}
    by_task: dict[str, list[dict]] = {}
    by_turn: dict[int, list[dict]] = {}
    for row in rows:
        by_category.setdefault(row["user_category"], []).append(row)
        by_task.setdefault(row["task"], []).append(row)
        by_turn.setdefault(row["turn_index"], []).append(row)

    judge_block = {"mean": None, "histogram": {str(k): 0 for k in range(1, 6)}, "errors": judge_errors}
    if verdicts:
        judge_block["mean"] = _mean([v.score for v in verdicts])
        for verdict in verdicts:
            judge_block["histogram"][str(verdict.score)] += 1
        order_counts = {"reference_first": 0, "candidate_first": 0}
        for verdict in verdicts:
            order_counts[verdict.presentation_order] += 1
        judge_block["presentation_orders"] = order_counts

    return {
        "method": method,
        "turns": len(rows),
        "metrics": {**overall, "llm_judge": judge_block["mean"]},
        "by_user_category": {k: _metric_means(v) for k, v in sorted(by_category.items())},
        "by_task": {k: _metric_means(v) for k, v in sorted(by_task.items())},
        "by_turn_index": {str(k): _metric_means(v) for k, v in sorted(by_turn.items())},
        "judge": judge_block,
    }


def format_report(report: dict) -> str:
    lines = [f"{'method':<24} " + " ".join(f"{m:>9}" for m in HEADLINE_METRICS)]
    metrics = report["metrics"]
    cells = []
    for name in HEADLINE_METRICS:
        value = metrics.get(name)
        cells.append(f"{value:>9.4f}" if isinstance(value, (int, float)) else f"{'-':>9}")
    lines.append(f"{report['method']:<24} " + " ".join(cells))
    lines.append("")
    lines.append("by user category:")
    for category, means in report["by_user_category"].items():
        lines.append(
            f"  {category:<20} " + " ".join(f"{means[m]:.4f}" for m in ("bleu", "rouge1", "rouge2", "rougeL"))
        )
    return "\n".join(lines)


def write_candidates(records: list[CandidateRecord], path: str | Path) -> None:
    lines = [json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) for r in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")


def read_candidates(path: str | Path) -> list[CandidateRecord]:
    path = Path(path)
    if not path.exists():
        raise Vid2DialogError(f"missing {path}; run the eval stage first")
    records = []
    for line in Path(path).read_text("utf-8").splitlines():
        if line.strip():
            records.append(CandidateRecord(**json.loads(line)))
    return records
