"""Runtime values of the expression subset.

Plain Python objects carry most kinds: None (null), bool, int, float
(integers and decimals stay distinct kinds), str, list, dict (contexts).
Temporal instants and ranges get small dedicated types, and UNDEFINED is
the before-first-write state of a process variable.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass

from ..errors import FeelTypeError, UndefinedValueError

SECONDS_PER_DAY = 86_400


class _Undefined:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEFINED"


#: Initial value of every process variable before its first write.
UNDEFINED = _Undefined()


@dataclass(frozen=True)
class Temporal:
    """A date (days as a proleptic ordinal) or a time (seconds since midnight)."""

    kind: str  # "date" | "time"
    scalar: int

    def __post_init__(self):
        if self.kind not in ("date", "time"):
            raise ValueError(f"bad temporal kind {self.kind!r}")

    @classmethod
    def from_text(cls, kind: str, text: str) -> "Temporal":
        if kind == "date":
            return cls("date", datetime.date.fromisoformat(text).toordinal())
        h, m, s = text.split(":")
        return cls("time", (int(h) * 3600 + int(m) * 60 + int(s)) % SECONDS_PER_DAY)

    def to_text(self) -> str:
        if self.kind == "date":
            return datetime.date.fromordinal(self.scalar).isoformat()
        h, rest = divmod(self.scalar, 3600)
        m, s = divmod(rest, 60)
        return f"{h:02d}:{m:02d}:{s:02d}"


@dataclass(frozen=True)
class FeelRange:
    """Numeric or temporal interval with per-end inclusivity."""

    lo: object
    hi: object
    lo_incl: bool = True
    hi_incl: bool = True

    def contains(self, value) -> bool:
        lo_ok = compare(value, self.lo) >= (0 if self.lo_incl else 1)
        hi_ok = compare(value, self.hi) <= (0 if self.hi_incl else -1)
        return lo_ok and hi_ok


def kind_of(value) -> str:
    if value is UNDEFINED:
        return "undefined"
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, Temporal):
        return value.kind
    if isinstance(value, FeelRange):
        return "range"
    if isinstance(value, list):
        return "list"
    if isinstance(value, dict):
        return "context"
    raise FeelTypeError(f"not a value of the expression language: {value!r}")


def check_defined(value):
    if value is UNDEFINED:
        raise UndefinedValueError("operation touches an undefined variable")
    return value


def compare(a, b) -> int:
    """Three-way ordering; only numbers, strings and same-kind temporals order."""
    check_defined(a)
    check_defined(b)
    ka, kb = kind_of(a), kind_of(b)
    if ka == kb == "number":
        return (a > b) - (a < b)
    if ka == kb == "string":
        return (a > b) - (a < b)
    if ka == kb and ka in ("date", "time"):
        return (a.scalar > b.scalar) - (a.scalar < b.scalar)
    raise FeelTypeError(f"cannot order {ka} against {kb}")


def equals(a, b) -> bool:
    """Structural equality; comparing against null is always defined."""
    check_defined(a)
    check_defined(b)
    ka, kb = kind_of(a), kind_of(b)
    if ka == "null" or kb == "null":
        return ka == kb
    if ka != kb:
        raise FeelTypeError(f"cannot compare {ka} against {kb} for equality")
    if ka == "number":
        return a == b
    if ka == "list":
        if len(a) != len(b):
            return False
        return all(equals(x, y) for x, y in zip(a, b))
    if ka == "context":
        if set(a) != set(b):
            return False
        return all(equals(a[k], b[k]) for k in a)
    return a == b


def render_value(value) -> str:
    """Literal syntax of a value; parses back to an equal constant."""
    check_defined(value)
    kind = kind_of(value)
    if kind == "null":
        return "null"
    if kind == "boolean":
        return "true" if value else "false"
    if kind == "number":
        return repr(value)
    if kind == "string":
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if kind in ("date", "time"):
        return f'{kind}("{value.to_text()}")'
    if kind == "list":
        return "[" + ", ".join(render_value(v) for v in value) + "]"
    if kind == "context":
        return "{" + ", ".join(f"{k}: {render_value(v)}" for k, v in value.items()) + "}"
    # range
    lo_b = "[" if value.lo_incl else "("
    hi_b = "]" if value.hi_incl else ")"
    return f"{lo_b}{render_value(value.lo)}..{render_value(value.hi)}{hi_b}"
