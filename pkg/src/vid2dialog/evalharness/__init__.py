"""Evaluation harness: text-overlap metrics, prompt assembly, and judging."""

from .assistants import EchoStepsBackend, NoKnowledgeBackend
from .judge import JudgeError, JudgeVerdict, judge
from .metrics import BLEU_MAX_ORDER, bleu, rouge, tokenize
from .prompts import PROMPT_MODES, PromptConfig, build_prompt
from .run import (
    CandidateRecord,
    aggregate,
    format_report,
    generate_candidates,
    read_candidates,
    run_judge,
    score_candidates,
    write_candidates,
)

__all__ = [
    "BLEU_MAX_ORDER",
    "CandidateRecord",
    "EchoStepsBackend",
    "JudgeError",
    "JudgeVerdict",
    "NoKnowledgeBackend",
    "PROMPT_MODES",
    "PromptConfig",
    "aggregate",
    "bleu",
    "build_prompt",
    "format_report",
    "generate_candidates",
    "judge",
    "read_candidates",
    "rouge",
    "run_judge",
    "score_candidates",
    "tokenize",
    "write_candidates",
]
