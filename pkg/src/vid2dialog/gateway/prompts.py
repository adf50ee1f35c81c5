"""Versioned catalog of prompt templates packaged with the library.

Templates live in ``vid2dialog/prompts/*.txt`` and use ``string.Template``
placeholders (``${name}``). The catalog version (``prompts/VERSION``) is
recorded in every run manifest so a dataset can be traced back to the exact
wording that produced it.
"""

from __future__ import annotations

import string
from functools import lru_cache
from importlib import resources

from ..errors import ConfigError


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    try:
        return resources.files("vid2dialog").joinpath(f"prompts/{name}.txt").read_text("utf-8")
    except FileNotFoundError:
        raise ConfigError(f"no prompt template named {name!r} in the catalog") from None


@lru_cache(maxsize=1)
def catalog_version() -> str:
    return resources.files("vid2dialog").joinpath("prompts/VERSION").read_text("utf-8").strip()


def render(name: str, **values: str) -> str:
    """Fill a template; unknown or missing placeholders raise ConfigError."""
    template = string.Template(load_template(name))
    placeholders = {
        m.group("named") or m.group("braced")
        for m in template.pattern.finditer(template.template)
        if m.group("named") or m.group("braced")
    }
    extras = set(values) - placeholders
    if extras:
        raise ConfigError(
            f"prompt template {name!r} has no placeholder(s) {sorted(extras)}"
        )
    try:
        return template.substitute(values)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"prompt template {name!r}: {exc}") from exc
