"""Exact multivariate polynomial arithmetic over the rationals.

Polynomials are stored densely as a map from exponent tuples to nonzero
rational coefficients. Everything here is exact: no floats enter except
through explicit evaluation at float points. Variable blocks (the four
coordinates of one R^4 factor) are addressed by index tuples; the module
provides closed-form integration of monomials over the unit sphere of a
block, which is the engine behind every exact computation downstream.
"""

from __future__ import annotations

import math
from functools import lru_cache

from .rational import Q, ZERO, rat, rat_to_json, rat_from_json

_DEGREE_CAP = 24


class DegreeCapError(ValueError):
    """Raised when an operation would exceed the configured total-degree cap."""


def set_degree_cap(cap: int) -> None:
    global _DEGREE_CAP
    if cap < 1:
        raise ValueError("degree cap must be positive")
    _DEGREE_CAP = cap


def get_degree_cap() -> int:
    return _DEGREE_CAP


class MultiPoly:
    """Immutable exact-rational polynomial in a fixed number of variables."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms=None):
        self.nvars = nvars
        clean = {}
        if terms:
            for exp, coef in terms.items():
                if len(exp) != nvars:
                    raise ValueError(f"exponent {exp} has wrong length for nvars={nvars}")
                c = coef if isinstance(coef, type(ZERO)) else rat(coef)
                if c != 0:
                    clean[tuple(exp)] = c
        self.terms = clean

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "MultiPoly":
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, c) -> "MultiPoly":
        return cls(nvars, {(0,) * nvars: rat(c)})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "MultiPoly":
        if not 0 <= i < nvars:
            raise ValueError(f"variable index {i} out of range")
        exp = [0] * nvars
        exp[i] = 1
        return cls(nvars, {tuple(exp): Q(1)})

    @classmethod
    def monomial(cls, nvars: int, exp, coef=1) -> "MultiPoly":
        return cls(nvars, {tuple(exp): rat(coef)})

    # -- basic queries -----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self.terms), default=-1)

    def block_degree(self, block) -> int:
        return max((sum(e[i] for i in block) for e in self.terms), default=-1)

    def constant_value(self):
        """The value of a constant polynomial, as an exact rational."""
        if not self.terms:
            return Q(0)
        if len(self.terms) == 1:
            (exp, coef), = self.terms.items()
            if not any(exp):
                return coef
        raise ValueError("polynomial is not constant")

    def coefficient(self, exp):
        return self.terms.get(tuple(exp), ZERO)

    def __eq__(self, other):
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return f"MultiPoly(nvars={self.nvars}, terms={len(self.terms)})"

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, MultiPoly):
            other = MultiPoly.constant(self.nvars, other)
        if self.nvars != other.nvars:
            raise ValueError("nvars mismatch")
        out = dict(self.terms)
        for exp, c in other.terms.items():
            s = out.get(exp, ZERO) + c
            if s:
                out[exp] = s
            else:
                out.pop(exp, None)
        p = MultiPoly.__new__(MultiPoly)
        p.nvars = self.nvars
        p.terms = out
        return p

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        p = MultiPoly.__new__(MultiPoly)
        p.nvars = self.nvars
        p.terms = {e: -c for e, c in self.terms.items()}
        return p

    def __sub__(self, other):
        if not isinstance(other, MultiPoly):
            other = MultiPoly.constant(self.nvars, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "MultiPoly":
        c = c if isinstance(c, type(ZERO)) else rat(c)
        if c == 0:
            return MultiPoly.zero(self.nvars)
        p = MultiPoly.__new__(MultiPoly)
        p.nvars = self.nvars
        p.terms = {e: k * c for e, k in self.terms.items()}
        return p

    def __mul__(self, other):
        if not isinstance(other, MultiPoly):
            return self.scale(other)
        if self.nvars != other.nvars:
            raise ValueError("nvars mismatch")
        if self.is_zero() or other.is_zero():
            return MultiPoly.zero(self.nvars)
        deg = self.degree() + other.degree()
        if deg > _DEGREE_CAP:
            raise DegreeCapError(
                f"product degree {deg} exceeds cap {_DEGREE_CAP}")
        a, b = self.terms, other.terms
        if len(a) < len(b):
            a, b = b, a
        out: dict = {}
        for eb, cb in b.items():
            for ea, ca in a.items():
                exp = tuple(p + q for p, q in zip(ea, eb))
                c = ca * cb
                prev = out.get(exp)
                if prev is None:
                    out[exp] = c
                else:
                    s = prev + c
                    if s:
                        out[exp] = s
                    else:
                        del out[exp]
        p = MultiPoly.__new__(MultiPoly)
        p.nvars = self.nvars
        p.terms = out
        return p

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, c):
        return self.scale(Q(1) / rat(c))

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = MultiPoly.constant(self.nvars, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    # -- structural operations ---------------------------------------------

    def lift(self, nvars: int, offset: int) -> "MultiPoly":
        """Reindex into a larger variable space, shifting indices by offset."""
        if offset + self.nvars > nvars:
            raise ValueError("lift does not fit")
        pre = (0,) * offset
        post = (0,) * (nvars - offset - self.nvars)
        p = MultiPoly.__new__(MultiPoly)
        p.nvars = nvars
        p.terms = {pre + e + post: c for e, c in self.terms.items()}
        return p

    def evaluate(self, point):
        """Evaluate at a point; exact if all inputs are rational."""
        if len(point) != self.nvars:
            raise ValueError("point has wrong dimension")
        total = None
        for exp, coef in self.terms.items():
            v = coef
            for val, e in zip(point, exp):
                if e:
                    v = v * val ** e
            total = v if total is None else total + v
        if total is None:
            return Q(0) if all(isinstance(x, (type(ZERO), int)) for x in point) else 0.0
        return total

    def to_arrays(self):
        """(exps, coefs) as numpy arrays for the float kernels."""
        import numpy as np
        if not self.terms:
            return (np.zeros((1, self.nvars), dtype=np.int64),
                    np.zeros(1, dtype=np.float64))
        items = sorted(self.terms.items(), reverse=True)
        exps = np.array([e for e, _ in items], dtype=np.int64)
        coefs = np.array([float(c) for _, c in items], dtype=np.float64)
        return exps, coefs

    def to_json(self) -> dict:
        items = sorted(self.terms.items(), reverse=True)
        return {
            "nvars": self.nvars,
            "terms": [{"exp": list(e), "coef": rat_to_json(c)} for e, c in items],
        }

    @classmethod
    def from_json(cls, d: dict) -> "MultiPoly":
        terms = {}
        for t in d["terms"]:
            terms[tuple(t["exp"])] = rat_from_json(t["coef"])
        return cls(int(d["nvars"]), terms)

    def to_text(self, names=None) -> str:
        if not self.terms:
            return "0"
        if names is None:
            names = [f"v{i}" for i in range(self.nvars)]
        parts = []
        for exp, coef in sorted(self.terms.items(), reverse=True):
            factors = [f"{names[i]}^{e}" if e > 1 else names[i]
                       for i, e in enumerate(exp) if e]
            body = "*".join(factors)
            parts.append(f"{coef}" + (f"*{body}" if body else ""))
        return " + ".join(parts)


# -- calculus and block operations ------------------------------------------


def euclidean_laplacian(p: MultiPoly, block) -> MultiPoly:
    """Sum of second partials over a 4-variable block."""
    _check_block(p, block)
    out: dict = {}
    for exp, coef in p.terms.items():
        for i in block:
            e = exp[i]
            if e >= 2:
                nexp = exp[:i] + (e - 2,) + exp[i + 1:]
                c = coef * (e * (e - 1))
                s = out.get(nexp, ZERO) + c
                if s:
                    out[nexp] = s
                else:
                    out.pop(nexp, None)
    q = MultiPoly.__new__(MultiPoly)
    q.nvars = p.nvars
    q.terms = out
    return q


def homogeneous_component(p: MultiPoly, degree: int) -> MultiPoly:
    q = MultiPoly.__new__(MultiPoly)
    q.nvars = p.nvars
    q.terms = {e: c for e, c in p.terms.items() if sum(e) == degree}
    return q


def homogeneous_components(p: MultiPoly) -> dict:
    """Map degree -> homogeneous component (nonzero components only)."""
    out: dict = {}
    for e, c in p.terms.items():
        out.setdefault(sum(e), {})[e] = c
    return {d: MultiPoly(p.nvars, t) for d, t in sorted(out.items())}


def is_homogeneous(p: MultiPoly, degree: int | None = None) -> bool:
    degs = {sum(e) for e in p.terms}
    if not degs:
        return True
    if len(degs) > 1:
        return False
    return degree is None or degs == {degree}


def substitute_linear(p: MultiPoly, images: dict, nvars_out: int) -> MultiPoly:
    """Exact composition p(v_0, ..., v_{n-1}) with v_i -> images[i].

    Every variable of p must have an image (a MultiPoly in the output
    variable space). Image powers are memoized across terms.
    """
    for i in range(p.nvars):
        if i not in images:
            raise ValueError(f"no image for variable {i}")
        if images[i].nvars != nvars_out:
            raise ValueError("image polynomials must live in the output space")
    if p.is_zero():
        return MultiPoly.zero(nvars_out)
    img_deg = {i: max(images[i].degree(), 0) for i in range(p.nvars)}
    worst = max(sum(e * img_deg[i] for i, e in enumerate(exp)) for exp in p.terms)
    if worst > _DEGREE_CAP:
        raise DegreeCapError(
            f"substitution degree {worst} exceeds cap {_DEGREE_CAP}")
    pow_cache: dict = {}

    def img_pow(i: int, e: int) -> MultiPoly:
        key = (i, e)
        got = pow_cache.get(key)
        if got is None:
            got = images[i] ** e
            pow_cache[key] = got
        return got

    total = MultiPoly.zero(nvars_out)
    for exp, coef in p.terms.items():
        factor = MultiPoly.constant(nvars_out, coef)
        for i, e in enumerate(exp):
            if e:
                factor = factor * img_pow(i, e)
        total = total + factor
    return total


# -- integration over the unit sphere of a block -----------------------------


@lru_cache(maxsize=None)
def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


@lru_cache(maxsize=None)
def monomial_sphere_integral(exp: tuple) -> "Q":
    """Integral of v^exp over S3 in R^4 against the uniform probability
    measure: 0 unless every exponent is even, else
    prod (a_i - 1)!! / (2^h (h+1)!) with h = (sum a_i) / 2.
    """
    if len(exp) != 4:
        raise ValueError("sphere monomial integrals are defined for 4-variable blocks")
    if any(a % 2 for a in exp):
        return Q(0)
    h = sum(exp) // 2
    num = 1
    for a in exp:
        num *= _double_factorial(a - 1)
    return Q(num) / Q((2 ** h) * math.factorial(h + 1))


def _check_block(p: MultiPoly, block):
    if len(block) != 4:
        raise ValueError("variable block must have exactly 4 entries")
    if len(set(block)) != 4 or any(not 0 <= i < p.nvars for i in block):
        raise ValueError(f"invalid variable block {block} for nvars={p.nvars}")


def _split_exp(exp, block, rest_idx):
    return (tuple(exp[i] for i in block), tuple(exp[i] for i in rest_idx))


def sphere_integral(p: MultiPoly, block) -> MultiPoly:
    """Integrate out a 4-variable block against the uniform probability
    measure on its unit sphere; exact. Returns a polynomial in the
    remaining variables (a constant polynomial if none remain).
    """
    _check_block(p, block)
    rest_idx = [i for i in range(p.nvars) if i not in block]
    out: dict = {}
    for exp, coef in p.terms.items():
        bexp, rexp = _split_exp(exp, block, rest_idx)
        w = monomial_sphere_integral(bexp)
        if w:
            c = coef * w
            s = out.get(rexp, ZERO) + c
            if s:
                out[rexp] = s
            else:
                out.pop(rexp, None)
    q = MultiPoly.__new__(MultiPoly)
    q.nvars = len(rest_idx)
    q.terms = out
    return q


def integrate_product_over_block(a: MultiPoly, b: MultiPoly, block) -> MultiPoly:
    """sphere_integral(a * b, block) computed without forming a * b.

    Terms are grouped by their block monomial; only parity-compatible
    group pairs contribute (odd exponent sums integrate to zero), which
    cuts the work by roughly the 2^4 parity-class count.
    """
    _check_block(a, block)
    if a.nvars != b.nvars:
        raise ValueError("nvars mismatch")
    rest_idx = [i for i in range(a.nvars) if i not in block]

    def grouped(p):
        groups: dict = {}
        for exp, coef in p.terms.items():
            bexp, rexp = _split_exp(exp, block, rest_idx)
            groups.setdefault(bexp, []).append((rexp, coef))
        return groups

    ga, gb = grouped(a), grouped(b)
    by_parity: dict = {}
    for delta, items in gb.items():
        key = tuple(e & 1 for e in delta)
        by_parity.setdefault(key, []).append((delta, items))

    out: dict = {}
    for gamma, aitems in ga.items():
        key = tuple(e & 1 for e in gamma)
        for delta, bitems in by_parity.get(key, ()):
            w = monomial_sphere_integral(tuple(x + y for x, y in zip(gamma, delta)))
            if not w:
                continue
            for ra, ca in aitems:
                cw = ca * w
                for rb, cb in bitems:
                    exp = tuple(x + y for x, y in zip(ra, rb))
                    c = cw * cb
                    prev = out.get(exp)
                    if prev is None:
                        out[exp] = c
                    else:
                        s = prev + c
                        if s:
                            out[exp] = s
                        else:
                            del out[exp]
    q = MultiPoly.__new__(MultiPoly)
    q.nvars = len(rest_idx)
    q.terms = out
    return q


def sphere_inner(p: MultiPoly, q: MultiPoly):
    """Exact L2 inner product over S3 of two 4-variable polynomials."""
    if p.nvars != 4 or q.nvars != 4:
        raise ValueError("sphere_inner expects 4-variable polynomials")
    by_parity: dict = {}
    for exp, coef in q.terms.items():
        by_parity.setdefault(tuple(e & 1 for e in exp), []).append((exp, coef))
    total = Q(0)
    for ea, ca in p.terms.items():
        for eb, cb in by_parity.get(tuple(e & 1 for e in ea), ()):
            total += ca * cb * monomial_sphere_integral(
                (ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], ea[3] + eb[3]))
    return total


# -- canonical reduction on the sphere ---------------------------------------

_COMPLEMENT_POWERS: dict = {}


def reduce_on_sphere(p: MultiPoly, block) -> MultiPoly:
    """Canonical representative of p modulo (sum of block squares) = 1.

    The last block variable's exponent is reduced below 2 by substituting
    its square with 1 minus the other three squares; representatives with
    that exponent in {0, 1} are unique, so equality of reduced forms is
    equality of restrictions to the sphere of the block.
    """
    _check_block(p, block)
    last = block[3]
    others = block[:3]
    if all(exp[last] < 2 for exp in p.terms):
        return p

    def complement_power(m: int) -> MultiPoly:
        key = (p.nvars, others, m)
        got = _COMPLEMENT_POWERS.get(key)
        if got is None:
            base = MultiPoly.constant(p.nvars, 1)
            for i in others:
                sq = [0] * p.nvars
                sq[i] = 2
                base = base - MultiPoly.monomial(p.nvars, sq)
            got = base ** m
            _COMPLEMENT_POWERS[key] = got
        return got

    total = MultiPoly.zero(p.nvars)
    passthrough: dict = {}
    for exp, coef in p.terms.items():
        e = exp[last]
        if e < 2:
            s = passthrough.get(exp, ZERO) + coef
            if s:
                passthrough[exp] = s
            else:
                passthrough.pop(exp, None)
            continue
        m, r = divmod(e, 2)
        rest = exp[:last] + (r,) + exp[last + 1:]
        total = total + complement_power(m).scale(coef) * MultiPoly.monomial(p.nvars, rest)
    total = total + MultiPoly(p.nvars, passthrough)
    # reduction may reintroduce high powers of the last variable via the
    # monomial multiply above only if `rest` overlaps `others`, never `last`
    if any(exp[last] >= 2 for exp in total.terms):
        return reduce_on_sphere(total, block)
    return total


# -- monomial enumeration ----------------------------------------------------


def monomials(nvars: int, degree: int) -> list:
    """Exponent tuples of the given total degree, lexicographically
    descending (the fixed graded-lex order used for basis construction)."""
    if degree < 0:
        return []
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(prefix + (remaining,))
            return
        for e in range(remaining, -1, -1):
            rec(prefix + (e,), remaining - e, slots - 1)

    rec((), degree, nvars)
    return out


def monomials_up_to(nvars: int, degree: int) -> list:
    return [e for d in range(degree + 1) for e in monomials(nvars, d)]


BLOCK_X4 = (0, 1, 2, 3)
