"""Command-line front door.

One config file (YAML, per-stage sections) with flags overriding config
values. Generation and shuffling subcommands require an explicit seed; there
is no wall-clock fallback, so identical invocations produce identical
artifacts. Exit codes: 0 ok, 1 stage error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import yaml

from .errors import ConfigError, ManifestError, SchemaError, Vid2DialogError
from .evalharness import (
    EchoStepsBackend,
    NoKnowledgeBackend,
    PromptConfig,
    aggregate,
    format_report,
    generate_candidates,
    read_candidates,
    run_judge,
    score_candidates,
    write_candidates,
)
from .gateway import CachedBackend, HttpBackend, MockBackend
from .pipeline import (
    ARTIFACTS,
    read_dataset,
    read_instructions,
    read_sources,
    run_pipeline,
    stage_clipjobs,
    stage_dialogue,
    stage_ingest,
    stage_instruct,
    stage_localize,
    stage_qc,
    write_run_manifest,
)
from .qc import sample_for_review, write_review_sheet
from .store import (
    compute_statistics,
    format_statistics,
    make_splits,
    read_sessions,
    read_split_assignment,
    write_split_assignment,
)

_GENERATIVE_COMMANDS = ("instruct", "dialogue", "pipeline", "split", "judge", "review-sheet")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as handle:
            data = yaml.safe_load(handle) or {}
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    return data


def _section(config: dict, name: str) -> dict:
    value = config.get(name, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    return dict(value)


def _effective(args: argparse.Namespace, config: dict, key: str, default=None):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def _require_seed(args: argparse.Namespace, config: dict) -> int:
    seed = _effective(args, config, "seed")
    if seed is None:
        raise ConfigError(
            f"subcommand {args.command!r} needs an explicit --seed (or a seed in the config);"
            " seeds never default to the clock"
        )
    return int(seed)


def _out_dir(args: argparse.Namespace, config: dict) -> Path:
    out = _effective(args, config, "out")
    if out is None:
        out = config.get("out_dir")
    if out is None:
        raise ConfigError("an output directory is required (--out or config out_dir)")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _build_backend(args: argparse.Namespace, config: dict, seed: int | None):
    section = _section(config, "backend")
    kind = getattr(args, "backend", None) or section.get("kind", "mock")
    if kind == "mock":
        backend = MockBackend(seed=int(section.get("mock_seed", seed or 0)))
    elif kind == "http":
        endpoint = section.get("endpoint")
        model = section.get("model")
        if not endpoint or not model:
            raise ConfigError("http backend needs backend.endpoint and backend.model in config")
        backend = HttpBackend(
            endpoint,
            model,
            credential_env=section.get("credential_env", "VID2DIALOG_API_KEY"),
        )
    else:
        raise ConfigError(f"unknown backend kind {kind!r}; expected mock or http")
    cache_dir = section.get("cache_dir")
    if cache_dir:
        backend = CachedBackend(backend, cache_dir)
    return backend


def _assistant_backend(name: str, args: argparse.Namespace, config: dict):
    if name == "echo-steps":
        return EchoStepsBackend()
    if name == "no-knowledge":
        return NoKnowledgeBackend()
    if name in ("mock", "http"):
        setattr(args, "backend", name)
        return _build_backend(args, config, seed=0)
    raise ConfigError(f"unknown assistant backend {name!r}")


def _config_snapshot(args: argparse.Namespace, config: dict, extra: dict) -> dict:
    snapshot = {"command": args.command, **extra}
    for key in ("seed", "jobs"):
        value = getattr(args, key, None)
        if value is not None:
            snapshot[key] = value
    snapshot["config"] = config
    return snapshot


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vid2dialog",
        description=(
            "Turn instructional-video sources into turn-grounded expert/novice "
            "dialogue datasets, then evaluate assistants on them."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, *, backend: bool = False, seeded: bool = False):
        p.add_argument("--config", help="YAML config file with per-stage sections")
        p.add_argument("--out", help="run directory for artifacts")
        p.add_argument("--jobs", type=int, help="parallel workers (default: core count)")
        if backend:
            p.add_argument("--backend", choices=("mock", "http"), help="chat backend kind")
        if seeded:
            p.add_argument("--seed", type=int, help="generation seed (required)")

    p = sub.add_parser("ingest", help="parse the manifest and its sidecar files")
    common(p)
    p.add_argument("--manifest", help="manifest JSON path")

    p = sub.add_parser("instruct", help="stage 1: form instruction lists")
    common(p, backend=True, seeded=True)

    p = sub.add_parser("dialogue", help="stage 2: generate dialogue sessions")
    common(p, backend=True, seeded=True)

    p = sub.add_parser("localize", help="stage 3: fill and repair video spans")
    common(p)

    p = sub.add_parser("qc", help="filter sessions into the final dataset")
    common(p)

    p = sub.add_parser("clipjobs", help="emit clip-extraction commands")
    common(p)
    p.add_argument("--tool-template", help="command template with {src} {start} {end} {out}")

    p = sub.add_parser("split", help="assign train/val/test splits")
    common(p, seeded=True)
    p.add_argument("--ratios", help="comma-separated ratios, e.g. 0.7,0.1,0.2")
    p.add_argument("--stratify", help="comma-separated keys, e.g. task,user_category")
    p.add_argument("--dataset", help="dataset path (default: <out>/dataset.jsonl)")

    p = sub.add_parser("stats", help="dataset statistics report")
    common(p)
    p.add_argument("--dataset", help="dataset path (default: <out>/dataset.jsonl)")

    p = sub.add_parser("review-sheet", help="sample turns for human review")
    common(p, seeded=True)
    p.add_argument("--dataset", help="dataset path (default: <out>/dataset.jsonl)")
    p.add_argument("--count", type=int, default=175, help="turns to sample (default 175)")

    p = sub.add_parser("eval", help="collect and score assistant candidates")
    common(p)
    p.add_argument("--dataset", help="dataset path (default: <out>/dataset.jsonl)")
    p.add_argument(
        "--mode", choices=("history_only", "history_plus_steps"), help="prompt configuration"
    )
    p.add_argument(
        "--assistant",
        choices=("echo-steps", "no-knowledge", "mock", "http"),
        help="assistant backend to evaluate",
    )
    p.add_argument("--split", choices=("train", "val", "test"), help="restrict to one split")
    p.add_argument("--splits", help="split assignment file (required with --split)")
    p.add_argument("--label", help="report directory name (default assistant-mode)")

    p = sub.add_parser("judge", help="run the LLM judge over collected candidates")
    common(p, backend=True, seeded=True)
    p.add_argument("--dataset", help="dataset path (default: <out>/dataset.jsonl)")
    p.add_argument("--candidates", help="candidates JSONL path (default from --label)")
    p.add_argument("--label", help="eval report directory the candidates came from")

    p = sub.add_parser("pipeline", help="ingest through qc in one run")
    common(p, backend=True, seeded=True)
    p.add_argument("--manifest", help="manifest JSON path")

    return parser


def _dataset_path(args: argparse.Namespace, out_dir: Path) -> Path:
    if getattr(args, "dataset", None):
        return Path(args.dataset)
    return out_dir / ARTIFACTS["dataset"]


def _stage_options(config: dict) -> dict:
    options = {}
    instruct = _section(config, "instruct")
    if instruct:
        options["instruct"] = {
            key: instruct[key]
            for key in ("stoplist_path", "max_words", "temperature", "top_p")
            if key in instruct
        }
    dialogue = _section(config, "dialogue")
    if dialogue:
        options["dialogue"] = {
            key: dialogue[key]
            for key in ("clarification_rate", "temperature", "top_p")
            if key in dialogue
        }
    qc_section = _section(config, "qc")
    if qc_section:
        options["qc"] = {
            key: qc_section[key]
            for key in ("max_user_words", "max_expert_words", "min_turns", "profanity_path")
            if key in qc_section
        }
    return options


def _run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    jobs = _effective(args, config, "jobs", os.cpu_count() or 1)
    command = args.command

    if command == "ingest":
        out = _out_dir(args, config)
        manifest = _effective(args, config, "manifest") or _section(config, "ingest").get("manifest")
        if not manifest:
            raise ConfigError("ingest needs --manifest or ingest.manifest in config")
        sources = stage_ingest(manifest, out)
        write_run_manifest(out, "ingest", _config_snapshot(args, config, {"manifest": str(manifest)}), None)
        print(f"ingested {len(sources)} source(s) into {out}")
        return 0

    if command == "instruct":
        out = _out_dir(args, config)
        seed = _require_seed(args, config)
        backend = _build_backend(args, config, seed)
        sources = read_sources(out)
        options = _stage_options(config).get("instruct", {})
        lists = stage_instruct(sources, backend, seed, out, jobs=jobs, **options)
        write_run_manifest(out, "instruct", _config_snapshot(args, config, {}), backend.backend_id)
        print(f"formed {len(lists)} instruction list(s)")
        return 0

    if command == "dialogue":
        out = _out_dir(args, config)
        seed = _require_seed(args, config)
        backend = _build_backend(args, config, seed)
        sources = read_sources(out)
        lists = read_instructions(out)
        options = _stage_options(config).get("dialogue", {})
        sessions = stage_dialogue(sources, lists, backend, seed, out, jobs=jobs, **options)
        write_run_manifest(out, "dialogue", _config_snapshot(args, config, {}), backend.backend_id)
        print(f"generated {len(sessions)} session(s)")
        return 0

    if command == "localize":
        out = _out_dir(args, config)
        sources = read_sources(out)
        sessions = read_sessions(out / ARTIFACTS["sessions_raw"])
        localized = stage_localize(sessions, sources, out)
        write_run_manifest(out, "localize", _config_snapshot(args, config, {}), None)
        print(f"localized {len(localized)} session(s)")
        return 0

    if command == "qc":
        out = _out_dir(args, config)
        sessions = read_sessions(out / ARTIFACTS["sessions_localized"])
        options = _stage_options(config).get("qc", {})
        kept = stage_qc(sessions, out, **options)
        write_run_manifest(out, "qc", _config_snapshot(args, config, {}), None)
        print(f"kept {len(kept)} session(s) in the dataset")
        return 0

    if command == "clipjobs":
        out = _out_dir(args, config)
        template = _effective(args, config, "tool_template") or _section(config, "clipjobs").get(
            "tool_template"
        )
        if not template:
            raise ConfigError("clipjobs needs --tool-template or clipjobs.tool_template")
        sessions = read_dataset(out)
        sources = read_sources(out)
        count = stage_clipjobs(sessions, sources, template, out)
        write_run_manifest(out, "clipjobs", _config_snapshot(args, config, {}), None)
        print(f"emitted {count} clip job(s)")
        return 0

    if command == "split":
        out = _out_dir(args, config)
        seed = _require_seed(args, config)
        section = _section(config, "split")
        ratios_text = _effective(args, config, "ratios") or section.get("ratios", "0.7,0.1,0.2")
        if isinstance(ratios_text, str):
            ratios = tuple(float(x) for x in ratios_text.split(","))
        else:
            ratios = tuple(float(x) for x in ratios_text)
        stratify_text = _effective(args, config, "stratify") or section.get(
            "stratify", "task,user_category"
        )
        if isinstance(stratify_text, str):
            stratify = tuple(stratify_text.split(","))
        else:
            stratify = tuple(stratify_text)
        sessions = read_sessions(_dataset_path(args, out))
        assignment = make_splits(sessions, ratios, stratify, seed)
        write_split_assignment(assignment, out / ARTIFACTS["splits"])
        write_run_manifest(out, "split", _config_snapshot(args, config, {"ratios": list(ratios)}), None)
        counts = assignment.counts()
        print(f"splits: train={counts['train']} val={counts['val']} test={counts['test']}")
        for warning in assignment.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        return 0

    if command == "stats":
        out = _out_dir(args, config)
        sessions = read_sessions(_dataset_path(args, out))
        stats = compute_statistics(sessions)
        (out / ARTIFACTS["stats"]).write_text(
            json.dumps(stats, indent=2, sort_keys=True) + "\n", "utf-8"
        )
        text = format_statistics(stats)
        (out / ARTIFACTS["stats_text"]).write_text(text + "\n", "utf-8")
        write_run_manifest(out, "stats", _config_snapshot(args, config, {}), None)
        print(text)
        return 0

    if command == "review-sheet":
        out = _out_dir(args, config)
        seed = _require_seed(args, config)
        sessions = read_sessions(_dataset_path(args, out))
        rows = sample_for_review(sessions, args.count, seed)
        sheet_path = out / "review_sheet.csv"
        write_review_sheet(rows, sheet_path)
        write_run_manifest(out, "review-sheet", _config_snapshot(args, config, {"count": args.count}), None)
        print(f"wrote {len(rows)} review row(s) to {sheet_path}")
        return 0

    if command == "eval":
        out = _out_dir(args, config)
        section = _section(config, "eval")
        mode = _effective(args, config, "mode") or section.get("mode")
        if not mode:
            raise ConfigError("eval needs --mode (history_only or history_plus_steps)")
        assistant_name = _effective(args, config, "assistant") or section.get("assistant")
        if not assistant_name:
            raise ConfigError("eval needs --assistant")
        sessions = read_sessions(_dataset_path(args, out))
        if args.split:
            if not args.splits:
                raise ConfigError("--split needs --splits pointing at the assignment file")
            assignment = read_split_assignment(args.splits)
            sessions = [s for s in sessions if assignment.by_id.get(s.id) == args.split]
            if not sessions:
                raise Vid2DialogError(f"no sessions in split {args.split!r}")
        assistant = _assistant_backend(assistant_name, args, config)
        label = args.label or f"{assistant_name}-{mode}"
        report_dir = out / "eval" / label
        report_dir.mkdir(parents=True, exist_ok=True)
        records = generate_candidates(sessions, assistant, PromptConfig(mode=mode))
        write_candidates(records, report_dir / "candidates.jsonl")
        rows = score_candidates(records, sessions)
        report = aggregate(rows, method=label)
        (report_dir / "metric_report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", "utf-8"
        )
        (report_dir / "metric_report.txt").write_text(format_report(report) + "\n", "utf-8")
        write_run_manifest(
            out, f"eval-{label}", _config_snapshot(args, config, {"mode": mode}), assistant.backend_id
        )
        print(format_report(report))
        return 0

    if command == "judge":
        out = _out_dir(args, config)
        seed = _require_seed(args, config)
        backend = _build_backend(args, config, seed)
        sessions = read_sessions(_dataset_path(args, out))
        if args.candidates:
            candidates_path = Path(args.candidates)
        elif args.label:
            candidates_path = out / "eval" / args.label / "candidates.jsonl"
        else:
            raise ConfigError("judge needs --candidates or --label")
        records = read_candidates(candidates_path)
        verdicts, errors = run_judge(records, sessions, backend, seed)
        rows = score_candidates(records, sessions)
        label = args.label or candidates_path.parent.name
        report = aggregate(rows, verdicts=verdicts, judge_errors=errors, method=label)
        report_dir = candidates_path.parent
        lines = [json.dumps(v.to_dict(), sort_keys=True, ensure_ascii=False) for v in verdicts]
        (report_dir / "verdicts.jsonl").write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")
        (report_dir / "judge_report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", "utf-8"
        )
        write_run_manifest(out, f"judge-{label}", _config_snapshot(args, config, {}), backend.backend_id)
        mean = report["judge"]["mean"]
        if mean is None:
            print(f"judged 0 turn(s), {errors} error(s)")
        else:
            print(f"judged {len(verdicts)} turn(s), {errors} error(s), mean score {mean:.3f}")
        return 0

    if command == "pipeline":
        out = _out_dir(args, config)
        seed = _require_seed(args, config)
        backend = _build_backend(args, config, seed)
        manifest = _effective(args, config, "manifest") or _section(config, "ingest").get("manifest")
        if not manifest:
            raise ConfigError("pipeline needs --manifest or ingest.manifest in config")
        kept = run_pipeline(
            manifest, backend, seed, out, stage_options=_stage_options(config), jobs=jobs
        )
        for stage in ("ingest", "instruct", "dialogue", "localize", "qc"):
            write_run_manifest(
                out, stage, _config_snapshot(args, config, {"manifest": str(manifest)}), backend.backend_id
            )
        write_run_manifest(
            out, "pipeline", _config_snapshot(args, config, {"manifest": str(manifest)}), backend.backend_id
        )
        print(f"pipeline complete: {len(kept)} session(s) in {out / ARTIFACTS['dataset']}")
        return 0

    raise ConfigError(f"unknown subcommand {command!r}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, ManifestError, SchemaError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Vid2DialogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
