"""Millisecond-exact time values.

Subtitle and annotation formats carry millisecond precision. Times are
stored as Decimal seconds quantized to 1 ms so that equality checks and
serialized output stay exact; floats drift under round-tripping.
"""

from __future__ import annotations

from decimal import Decimal, InvalidOperation, ROUND_HALF_UP

_MS = Decimal("0.001")


def seconds(value) -> Decimal:
    """Coerce ``value`` (str, int, float or Decimal) to Decimal seconds at ms resolution."""
    if isinstance(value, Decimal):
        dec = value
    elif isinstance(value, float):
        # repr() keeps the shortest decimal form, so 1.1 -> 1.100 rather
        # than the full binary expansion.
        dec = Decimal(repr(value))
    elif isinstance(value, (int, str)):
        try:
            dec = Decimal(value)
        except InvalidOperation as exc:
            raise ValueError(f"not a time value: {value!r}") from exc
    else:
        raise TypeError(f"cannot interpret {type(value).__name__} as seconds")
    return dec.quantize(_MS, rounding=ROUND_HALF_UP)


def fmt_seconds(value: Decimal) -> str:
    """Canonical fixed three-decimal rendering, e.g. ``12.480``."""
    return f"{value:.3f}"
