"""Release gate for the whole package.

One test per shipping requirement. Each prints exactly one PASS/FAIL line
(visible with -s or in the captured output of a failure) and pins its
tolerance next to the assertion. Everything runs offline on the bundled
fixture corpus plus synthetic stress inputs; the full module stays well
under thirty seconds.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import replace

import pytest

from vid2dialog.errors import LocalizationError
from vid2dialog.evalharness import (
    EchoStepsBackend,
    NoKnowledgeBackend,
    PromptConfig,
    aggregate,
    generate_candidates,
    run_judge,
    score_candidates,
)
from vid2dialog.evalharness.metrics import bleu, rouge
from vid2dialog.gateway import MockBackend
from vid2dialog.localize import repair_spans
from vid2dialog.model import AtomicStep, DialogueTurn, InstructionList, Session
from vid2dialog.pipeline import read_dataset, run_pipeline
from vid2dialog.qc import qc_filter, score_review
from vid2dialog.store import SPLIT_NAMES, make_splits

from conftest import FIXTURES

MANIFEST = FIXTURES / "manifest.json"

METRIC_TOLERANCE = 1e-9
QC_REMOVAL_CEILING = 0.04
REVIEW_PERCENT = 93.1
REVIEW_PERCENT_TOLERANCE = 0.1
SPLIT_RATIOS = (0.7, 0.1, 0.2)
JUDGE_TRIALS = 1000


def _gate(name: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'}: {name} - {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """Three full pipeline runs: twice with one seed, once with another."""
    root = tmp_path_factory.mktemp("acceptance")
    dirs = {}
    for label, seed in (("a7", 7), ("b7", 7), ("c8", 8)):
        out = root / label
        run_pipeline(MANIFEST, MockBackend(seed=seed), seed, out)
        dirs[label] = out
    return dirs


def _tree_bytes(root):
    return {
        str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
    }


def test_gate_1_same_seed_runs_are_byte_identical(runs):
    left, right = _tree_bytes(runs["a7"]), _tree_bytes(runs["b7"])
    same_names = sorted(left) == sorted(right)
    diffs = [name for name in left if same_names and left[name] != right[name]]
    _gate(
        "same seed, same bytes",
        same_names and not diffs,
        f"{len(left)} artifact files compared, differing: {diffs or 'none'}",
    )


def _structure(sessions):
    return [
        (
            s.id,
            s.source,
            s.speech_style,
            s.action_category,
            tuple((t.index, t.step_index, t.is_error_turn, t.video_span) for t in s.turns),
        )
        for s in sessions
    ]


def test_gate_2_seed_change_alters_wording_not_structure(runs):
    left, right = read_dataset(runs["a7"]), read_dataset(runs["c8"])
    structure_same = _structure(left) == _structure(right)
    wording_differs = any(
        ta.user_utterance != tb.user_utterance or ta.expert_response != tb.expert_response
        for sa, sb in zip(left, right)
        for ta, tb in zip(sa.turns, sb.turns)
    )
    _gate(
        "seed only moves surface wording",
        structure_same and wording_differs,
        f"structure_same={structure_same} wording_differs={wording_differs}",
    )


# (candidate, reference) -> bleu, rouge1, rouge2, rougeL; values frozen from an
# independent reference implementation of the published formulas.
METRIC_GOLDENS = [
    (
        ("the cat sat", "the cat sat down"),
        (0.716531310573789, 0.857142857142857, 0.8, 0.857142857142857),
    ),
    (
        ("add water", "add two cups of water"),
        (0.157776849328195, 0.571428571428571, 0.0, 0.571428571428571),
    ),
    (
        ("place the bag in the mug now", "place the tea bag in the mug"),
        (0.488923022434901, 0.857142857142857, 0.666666666666667, 0.857142857142857),
    ),
    (
        ("stir, then pour.", "stir then pour"),
        (0.334370152488211, 0.75, 0.333333333333333, 0.75),
    ),
    (
        ("the the the cat", "the cat the"),
        (0.451801001804922, 0.857142857142857, 0.4, 0.571428571428571),
    ),
    (
        ("place bag in mug", "place the tea bag in the mug"),
        (0.229330074585516, 0.727272727272727, 0.222222222222222, 0.727272727272727),
    ),
]


def test_gate_3_metric_goldens_within_1e9():
    worst = 0.0
    for (cand, ref), (want_bleu, want_r1, want_r2, want_rl) in METRIC_GOLDENS:
        got_rouge = rouge(cand, ref)
        for got, want in (
            (bleu(cand, ref), want_bleu),
            (got_rouge["rouge1"], want_r1),
            (got_rouge["rouge2"], want_r2),
            (got_rouge["rougeL"], want_rl),
        ):
            worst = max(worst, abs(got - want))
    _gate(
        "metric goldens at 1e-9",
        worst <= METRIC_TOLERANCE,
        f"{len(METRIC_GOLDENS)} cases, worst abs error {worst:.3e}",
    )


def _span_session(turn_spans):
    steps = tuple(
        AtomicStep(index=i, text=f"perform action {i}", source_spans=(span,))
        for i, span in enumerate(turn_spans)
    )
    turns = tuple(
        DialogueTurn(
            index=i,
            user_utterance=f"how do i handle part {i}?",
            expert_response=f"you should perform action {i} carefully.",
            step_index=i,
            video_span=span,
        )
        for i, span in enumerate(turn_spans)
    )
    return Session(
        id="spans-regular",
        source="v1",
        instructions=InstructionList("span stress task", steps),
        turns=turns,
        speech_style="regular",
        action_category="following_steps",
    )


def test_gate_4_overlap_repair_exhaustive():
    points = (0, 4, 8, 12, 16, 20)
    checked = rejected = violations = 0
    for count in (2, 3):
        for combo in itertools.permutations(points, 2 * count):
            raw = [(combo[2 * i], combo[2 * i + 1]) for i in range(count)]
            if any(b <= a for a, b in raw):
                continue
            session = _span_session(raw)
            try:
                repaired = repair_spans(session)
            except LocalizationError:
                rejected += 1
                continue
            checked += 1
            spans = [t.video_span for t in repaired.turns]
            ok = (
                all(end > start for start, end in spans)
                and all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))
                and all(rs == os_ and re_ <= oe for (rs, re_), (os_, oe) in zip(spans, raw))
            )
            violations += not ok
    _gate(
        "span repair over every 2- and 3-span layout",
        checked > 0 and rejected > 0 and violations == 0,
        f"repaired={checked} rejected={rejected} invariant violations={violations}",
    )


def _synthetic_session(sid, task, style, category):
    steps = (AtomicStep(index=0, text=f"do the only step of {sid}", source_spans=((0, 5),)),)
    turns = (
        DialogueTurn(
            index=0,
            user_utterance=f"what do i do first for {sid}?",
            expert_response=f"you start {sid} by doing its only step.",
            step_index=0,
            video_span=(0, 5),
        ),
    )
    return Session(
        id=sid,
        source=sid.rsplit("-", 1)[0],
        instructions=InstructionList(task, steps),
        turns=turns,
        speech_style=style,
        action_category=category,
    )


def test_gate_5_split_counts_track_ratios_on_507_sessions():
    # 507 sessions over 12 strata (6 tasks x up to 3 user categories)
    sizes = [101, 90, 83, 61, 55, 40, 30, 20, 12, 8, 5, 2]
    assert sum(sizes) == 507
    kinds = [
        ("regular", "following_steps"),
        ("concise", "following_steps"),
        ("regular", "making_errors"),
    ]
    sessions = []
    for stratum, size in enumerate(sizes):
        task = f"task {stratum // 3}"
        style, category = kinds[stratum % 3]
        for i in range(size):
            sessions.append(_synthetic_session(f"s{stratum}-{i}-{style}", task, style, category))
    assignment = make_splits(sessions, SPLIT_RATIOS, ("task", "user_category"), seed=42)
    counts = assignment.counts()
    partitioned = sum(counts.values()) == 507
    slack = len(sizes)  # one rounding unit per stratum at most
    drifts = {
        name: abs(counts[name] - ratio * 507) for name, ratio in zip(SPLIT_NAMES, SPLIT_RATIOS)
    }
    within = all(drift <= slack for drift in drifts.values())
    _gate(
        "stratified splits track 70/10/20 on 507 sessions",
        partitioned and within,
        f"counts={counts} max drift {max(drifts.values()):.1f} allowed {slack}",
    )


def _swap_turn(session, index, **changes):
    turns = list(session.turns)
    turns[index] = replace(turns[index], **changes)
    return replace(session, turns=tuple(turns))


def test_gate_6_qc_catches_planted_defects_and_spares_clean_data(runs):
    clean = read_dataset(runs["a7"])
    total_turns = sum(len(s.turns) for s in clean)
    untouched = qc_filter(clean)
    clean_fraction = untouched.removed_turn_count / total_turns

    by_id = {s.id: s for s in clean}
    planted = set()
    coffee = by_id["coffee-01-regular"]
    coffee = _swap_turn(coffee, 5, expert_response="yes yes yes yes")
    planted.add((coffee.id, 5))
    omelet = by_id["omelet-01-regular"]
    omelet = _swap_turn(omelet, 4, expert_response=omelet.turns[1].expert_response)
    planted.add((omelet.id, 4))
    pinwheels = _swap_turn(
        by_id["pinwheels-01-regular"], 1, expert_response="this shitty filling never sticks."
    )
    planted.add((pinwheels.id, 1))
    tea_c = _swap_turn(
        by_id["tea-01-concise"],
        3,
        user_utterance=coffee.turns[1].user_utterance,
        expert_response=coffee.turns[1].expert_response,
    )
    planted.add((tea_c.id, 3))
    tea_r = _swap_turn(by_id["tea-01-regular"], 2, user_utterance="um " * 61 + "now what?")
    planted.add((tea_r.id, 2))
    tea_r = _swap_turn(tea_r, 5, video_span=None)
    planted.add((tea_r.id, 5))

    result = qc_filter([coffee, omelet, pinwheels, tea_c, tea_r])
    removed = {(r.session_id, r.turn_index) for r in result.removals if r.turn_index is not None}
    true_hits = len(removed & planted)
    precision = true_hits / len(removed) if removed else 0.0
    recall = true_hits / len(planted)
    _gate(
        "qc precision/recall 1.0 on planted defects, clean corpus spared",
        precision == 1.0 and recall == 1.0 and clean_fraction <= QC_REMOVAL_CEILING,
        f"precision={precision} recall={recall} "
        f"clean removal fraction={clean_fraction:.3f} (ceiling {QC_REMOVAL_CEILING})",
    )


def _review_row(key, a=(1, 1, 1), b=(1, 1, 1)):
    sid, idx = key.split("/")
    row = {"session_id": sid, "turn_index": idx}
    criteria = ("instruction_correct", "dialogue_natural", "video_aligned")
    for who, marks in (("a1", a), ("a2", b)):
        for crit, mark in zip(criteria, marks):
            row[f"{who}_{crit}"] = str(mark)
    return row


def test_gate_7_review_protocol_reproduces_usable_percentage():
    rows = [_review_row(f"s/{i}") for i in range(163)]
    rows += [_review_row(f"s/{163 + i}", a=(1, 0, 0)) for i in range(12)]
    summary = score_review(rows)
    percent = summary.usable_fraction * 100
    ok = summary.total == 175 and abs(percent - REVIEW_PERCENT) <= REVIEW_PERCENT_TOLERANCE
    _gate(
        "163 of 175 reviewed turns usable",
        ok,
        f"usable={summary.usable}/{summary.total} = {percent:.1f}% "
        f"(target {REVIEW_PERCENT} +/- {REVIEW_PERCENT_TOLERANCE})",
    )


def test_gate_8_step_aware_assistant_beats_blind_one(runs):
    sessions = read_dataset(runs["a7"])
    reports = {}
    for name, backend, mode in (
        ("informed", EchoStepsBackend(), "history_plus_steps"),
        ("blind", NoKnowledgeBackend(), "history_only"),
    ):
        records = generate_candidates(sessions, backend, PromptConfig(mode=mode))
        reports[name] = aggregate(score_candidates(records, sessions), method=name)["metrics"]
    gaps = {
        metric: reports["informed"][metric] - reports["blind"][metric]
        for metric in ("bleu", "rougeL")
    }
    _gate(
        "steps-in-prompt beats history-only on bleu and rougeL",
        all(gap > 0 for gap in gaps.values()),
        "informed minus blind: "
        + " ".join(f"{metric}=+{gap:.4f}" for metric, gap in gaps.items()),
    )


def binomial_99_bounds(n: int) -> tuple[int, int]:
    """Central interval of binomial(n, 1/2) with each exact tail at most 0.5%."""
    scale = 2**n
    cdf = 0
    lo = 0
    for k in range(n + 1):
        cdf += math.comb(n, k)
        if cdf * 200 > scale:
            lo = k
            break
    return lo, n - lo


def test_gate_9_judge_protocol_parses_and_balances_presentation(runs):
    sessions = read_dataset(runs["a7"])
    target = [s for s in sessions if s.id == "tea-01-regular"]
    records = generate_candidates(target, EchoStepsBackend(), PromptConfig(mode="history_only"))
    record = records[:1]
    judge = MockBackend(seed=0)
    parse_failures = 0
    candidate_first = 0
    for trial in range(JUDGE_TRIALS):
        verdicts, errors = run_judge(record, target, judge, seed=trial)
        parse_failures += errors
        if errors:
            continue
        verdict = verdicts[0]
        if verdict.score not in (1, 2, 3, 4, 5) or verdict.presentation_order not in (
            "candidate_first",
            "reference_first",
        ):
            parse_failures += 1
            continue
        candidate_first += verdict.presentation_order == "candidate_first"
    lo, hi = binomial_99_bounds(JUDGE_TRIALS)
    balanced = lo <= candidate_first <= hi
    _gate(
        "judge verdicts parse and presentation order stays balanced",
        parse_failures == 0 and balanced,
        f"trials={JUDGE_TRIALS} parse failures={parse_failures} "
        f"candidate_first={candidate_first} in [{lo}, {hi}]",
    )
