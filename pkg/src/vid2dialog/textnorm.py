"""Small text heuristics for turning narration into imperative step text.

Everything here is a plain function of its inputs; the verb lexicon and the
gerund table are deliberately small and geared to household procedural tasks
(cooking, repair, crafts). Unknown words pass through untouched, so these
helpers clean text up but never invent content.
"""

from __future__ import annotations

import re

IMPERATIVE_VERBS = frozenset(
    """
    add align attach boil brew check chop close cut drain drizzle dry fill
    flip fold grab grind heat hold insert jack lift loosen lower lay measure
    microwave mix open peel place position pour press pump push put remove
    rinse roll scoop screw secure serve slice spread sprinkle squeeze steep
    stir take tighten turn twist unscrew wait wash whisk wipe wrap
    """.split()
)

_GERUND_TABLE = {
    "adding": "add",
    "boiling": "boil",
    "brewing": "brew",
    "checking": "check",
    "chopping": "chop",
    "closing": "close",
    "cutting": "cut",
    "filling": "fill",
    "flipping": "flip",
    "folding": "fold",
    "grabbing": "grab",
    "grinding": "grind",
    "heating": "heat",
    "laying": "lay",
    "lifting": "lift",
    "measuring": "measure",
    "mixing": "mix",
    "opening": "open",
    "peeling": "peel",
    "placing": "place",
    "pouring": "pour",
    "pressing": "press",
    "pumping": "pump",
    "putting": "put",
    "removing": "remove",
    "rinsing": "rinse",
    "rolling": "roll",
    "scooping": "scoop",
    "screwing": "screw",
    "serving": "serve",
    "slicing": "slice",
    "spreading": "spread",
    "sprinkling": "sprinkle",
    "squeezing": "squeeze",
    "steeping": "steep",
    "stirring": "stir",
    "taking": "take",
    "tightening": "tighten",
    "turning": "turn",
    "twisting": "twist",
    "unscrewing": "unscrew",
    "washing": "wash",
    "whisking": "whisk",
    "wiping": "wipe",
    "wrapping": "wrap",
}

_ARTICLES = ("the", "a", "an")

# Leading narration filler, longest phrases first so prefixes are stripped greedily.
_FILLER_PHRASES = (
    "you are going to want to",
    "you're going to want to",
    "now you want to",
    "you want to",
    "you are going to",
    "you're going to",
    "we are going to",
    "we're going to",
    "i am going to",
    "i'm going to",
    "you need to",
    "go ahead and",
    "the next thing is to",
    "the next step is to",
    "make sure to",
    "make sure you",
)

_FILLER_WORDS = frozenset(
    "now then okay ok so first next alright well just and finally please".split()
)

_WS_RE = re.compile(r"\s+")
_TRAIL_PUNCT_RE = re.compile(r"[\s.,;:!?]+$")


def collapse_whitespace(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


def _strip_fillers(text: str) -> str:
    changed = True
    while changed:
        changed = False
        for phrase in _FILLER_PHRASES:
            if text.startswith(phrase + " "):
                text = text[len(phrase) + 1 :]
                changed = True
        words = text.split(" ", 1)
        if len(words) == 2 and words[0].strip(",") in _FILLER_WORDS:
            text = words[1]
            changed = True
    return text


def _degerund(word: str) -> str:
    if word in _GERUND_TABLE:
        return _GERUND_TABLE[word]
    if word.endswith("ing") and len(word) > 4:
        stem = word[:-3]
        for candidate in (stem, stem + "e", stem[:-1]):
            if candidate in IMPERATIVE_VERBS:
                return candidate
    return word


def normalize_description(text: str) -> str:
    """Canonical form used to merge and compare annotation rows.

    Lowercase, collapsed whitespace, trailing punctuation dropped, leading
    articles removed, and a leading gerund turned imperative when the verb
    is known ("Stirring the tea." -> "stir the tea").
    """
    text = collapse_whitespace(text.lower())
    text = _TRAIL_PUNCT_RE.sub("", text)
    words = text.split()
    while words and words[0] in _ARTICLES:
        words.pop(0)
    if words:
        words[0] = _degerund(words[0])
    return " ".join(words)


def imperativize(text: str) -> str:
    """Best-effort rewrite of a narration cue into an imperative clause."""
    text = collapse_whitespace(text.lower())
    text = _TRAIL_PUNCT_RE.sub("", text)
    text = _strip_fillers(text)
    words = text.split()
    while words and words[0] in _ARTICLES:
        words.pop(0)
    if words:
        words[0] = _degerund(words[0])
    result = " ".join(words)
    return result if result else collapse_whitespace(text)


def split_conjoined(text: str) -> list[str]:
    """Split one clause into several when it chains imperative verbs.

    "fold the filter and place it in the cone" -> two clauses. Conservative:
    only splits when the clause starts with a known imperative verb and the
    word after the conjunction is also a known imperative verb.
    """
    words = collapse_whitespace(text).split()
    if not words or words[0].lower().strip(",.") not in IMPERATIVE_VERBS:
        return [text]
    parts: list[list[str]] = [[]]
    i = 0
    while i < len(words):
        word = words[i]
        bare = word.lower().strip(",.")
        if (
            bare in ("and", "then")
            and i + 1 < len(words)
            and words[i + 1].lower().strip(",.") in IMPERATIVE_VERBS
            and parts[-1]
        ):
            parts.append([])
            i += 1
            continue
        parts[-1].append(word)
        i += 1
    clauses = [" ".join(p).strip(" ,") for p in parts if p]
    return clauses if clauses else [text]


def word_count(text: str) -> int:
    return len(text.split())
