"""Exact rational scalars and their textual form.

All problem data and all solver arithmetic use `Rat`, an arbitrary-precision
rational stored in lowest terms with a positive denominator.  The stdlib
`fractions.Fraction` provides exactly these invariants and exact +,-,*,/ and
comparisons, so it is used directly.

The file format stores rationals as strings: an optional minus sign, an
integer numerator, and an optional "/denominator" part.  Floating-point
literals are rejected.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .errors import ParseError

Rat = Fraction

ZERO = Fraction(0)
ONE = Fraction(1)

_RAT_RE = re.compile(r"^-?\d+(/\d+)?$")


def parse_rational(text: str) -> Rat:
    """Parse a rational literal like "5", "-25/2", or "25/10" (normalized)."""
    if not isinstance(text, str) or not _RAT_RE.match(text):
        raise ParseError(f"malformed rational literal: {text!r}")
    if "/" in text:
        num, den = text.split("/")
        if int(den) == 0:
            raise ParseError(f"malformed rational literal (zero denominator): {text!r}")
        return Fraction(int(num), int(den))
    return Fraction(int(text))


def format_rational(value: Rat) -> str:
    """Canonical text for a rational: lowest terms, sign on the numerator."""
    return str(value)
