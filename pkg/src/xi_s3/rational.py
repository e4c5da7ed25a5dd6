"""Exact rational scalars.

All exact arithmetic in this package runs on a single rational type `Q`:
gmpy2's mpq when available (much faster), stdlib Fraction otherwise. Both
keep gcd(|num|, den) = 1 with den > 0, which is all downstream code relies
on.
"""

from __future__ import annotations

from fractions import Fraction

try:
    from gmpy2 import mpq as Q
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    Q = Fraction

ZERO = Q(0)
ONE = Q(1)


def rat(num, den=1):
    """Build a rational from ints, a rational, or a "n/d" string."""
    if isinstance(num, str):
        return Q(Fraction(num))
    return Q(num) / Q(den) if den != 1 else Q(num)


def is_rational(x) -> bool:
    return isinstance(x, (type(ZERO), Fraction, int))


def rat_to_json(q) -> list:
    """JSON form of a rational: [numerator, denominator]."""
    return [int(q.numerator), int(q.denominator)]


def rat_from_json(v):
    """Accept [num, den] pairs, bare ints, or floats (float mode)."""
    if isinstance(v, (list, tuple)):
        num, den = v
        return Q(int(num)) / Q(int(den))
    if isinstance(v, int):
        return Q(v)
    return float(v)
