# rationals.py
"""
Exact rationals on the wire, and the pass/fail record every bound check produces.

Every utility, welfare and ratio in this repo is a `fractions.Fraction` whose
denominator divides S*G. They serialize as "num/den" in lowest terms (always
with a denominator, so "1/1" and "0/1"), which keeps a tight bound like 3/2
intact through CSV and JSON.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from errors import InputError

PASS = "pass"
FAIL = "fail"
SKIP = "skip"

Rational = Union[Fraction, int]


def fmt_q(value: Optional[Rational]) -> str:
    if value is None:
        return "undefined"
    q = Fraction(value)
    return f"{q.numerator}/{q.denominator}"


def parse_q(text: str, *, field: Optional[str] = None) -> Fraction:
    """Parse "3/4", "1" or "0.25" exactly; floats are never involved."""
    raw = (text or "").strip()
    if not raw:
        raise InputError("empty rational", field=field)
    try:
        q = Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise InputError(f"not a rational: {raw!r}", field=field) from None
    return q


@dataclass(frozen=True)
class Verdict:
    """One inequality, both sides kept exact. `relation` reads lhs <relation> rhs."""
    name: str
    relation: str
    lhs: Optional[Fraction]
    rhs: Optional[Fraction]
    status: str
    note: str = ""

    @property
    def slack(self) -> Optional[Fraction]:
        if self.lhs is None or self.rhs is None:
            return None
        if self.relation == "<=":
            return self.rhs - self.lhs
        if self.relation == ">=":
            return self.lhs - self.rhs
        return abs(self.lhs - self.rhs)

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    def describe(self) -> str:
        if self.status == SKIP:
            return f"{self.name}=skip ({self.note})" if self.note else f"{self.name}=skip"
        return f"{self.name}={self.status} [{fmt_q(self.lhs)} {self.relation} {fmt_q(self.rhs)}]"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "relation": self.relation,
            "lhs": None if self.lhs is None else fmt_q(self.lhs),
            "rhs": None if self.rhs is None else fmt_q(self.rhs),
            "status": self.status,
            "slack": None if self.slack is None else fmt_q(self.slack),
            "note": self.note,
        }


_RELATIONS = {
    ">=": lambda a, b: a >= b,
    "<=": lambda a, b: a <= b,
    "==": lambda a, b: a == b,
}


def check(name: str, lhs: Rational, relation: str, rhs: Rational, note: str = "") -> Verdict:
    lhs_q, rhs_q = Fraction(lhs), Fraction(rhs)
    ok = _RELATIONS[relation](lhs_q, rhs_q)
    return Verdict(name, relation, lhs_q, rhs_q, PASS if ok else FAIL, note)


def skipped(name: str, relation: str, reason: str) -> Verdict:
    return Verdict(name, relation, None, None, SKIP, reason)
