"""Unit quaternions as the group S3 = SU(2).

Convention: components (w, x, y, z) in the basis (1, i, j, k), first
component real, Hamilton product taken left to right. Components are
either exact rationals (authoritative backend) or floats (quadrature
backend); the same class carries both.
"""

from __future__ import annotations

import numpy as np

from .rational import Q, rat, rat_to_json, is_rational


class Quaternion:
    __slots__ = ("w", "x", "y", "z")

    def __init__(self, w, x, y, z):
        self.w = w
        self.x = x
        self.y = y
        self.z = z

    @classmethod
    def rational(cls, w, x, y, z) -> "Quaternion":
        return cls(rat(w), rat(x), rat(y), rat(z))

    def __iter__(self):
        yield from (self.w, self.x, self.y, self.z)

    def __repr__(self):
        return f"Quaternion({self.w}, {self.x}, {self.y}, {self.z})"

    def __eq__(self, other):
        if not isinstance(other, Quaternion):
            return NotImplemented
        return (self.w == other.w and self.x == other.x
                and self.y == other.y and self.z == other.z)

    def __hash__(self):
        return hash((self.w, self.x, self.y, self.z))

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        a, b = self, other
        return Quaternion(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )

    def __neg__(self):
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def conj(self) -> "Quaternion":
        """Quaternionic conjugation; the group inverse for unit quaternions."""
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def dot(self, other: "Quaternion"):
        """R^4 inner product; equals the real part of conj(self) * other."""
        return (self.w * other.w + self.x * other.x
                + self.y * other.y + self.z * other.z)

    def norm_sq(self):
        return self.dot(self)

    def is_unit(self, tol: float = 1e-12) -> bool:
        n = self.norm_sq()
        if is_rational(n):
            return n == 1
        return abs(float(n) - 1.0) <= tol

    def is_exact(self) -> bool:
        return is_rational(self.w)

    def to_float(self) -> "Quaternion":
        return Quaternion(float(self.w), float(self.x), float(self.y), float(self.z))

    def to_array(self) -> np.ndarray:
        return np.array([float(self.w), float(self.x), float(self.y), float(self.z)])

    def to_json(self) -> list:
        if self.is_exact():
            return [rat_to_json(c) for c in self]
        return [float(c) for c in self]

    @classmethod
    def from_json(cls, v) -> "Quaternion":
        comps = []
        for c in v:
            if isinstance(c, (list, tuple)):
                comps.append(Q(int(c[0])) / Q(int(c[1])))
            elif isinstance(c, int):
                comps.append(Q(c))
            else:
                comps.append(float(c))
        return cls(*comps)


def mul(a: Quaternion, b: Quaternion) -> Quaternion:
    return a * b


def conj(q: Quaternion) -> Quaternion:
    return q.conj()


def dot(a: Quaternion, b: Quaternion):
    return a.dot(b)


ONE = Quaternion.rational(1, 0, 0, 0)
I = Quaternion.rational(0, 1, 0, 0)
J = Quaternion.rational(0, 0, 1, 0)
K = Quaternion.rational(0, 0, 0, 1)


def haar_sample(seed: int, n: int) -> list[Quaternion]:
    """n i.i.d. Haar-uniform unit quaternions (normalized 4D Gaussians).

    Deterministic for a given seed; float backend.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return [Quaternion(*row) for row in haar_array(seed, n)]


def haar_array(seed: int, n: int) -> np.ndarray:
    """Array form of haar_sample: (n, 4) float64, rows on the unit sphere."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, 4))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


def rational_unit(a, b, c) -> Quaternion:
    """Exact unit quaternion from a rational 3-vector via stereographic
    projection: (a,b,c) -> ((1-t, 2a, 2b, 2c)) / (1+t) with t = a^2+b^2+c^2.

    Dense in S3, so random rational inputs give usable exact sample points.
    """
    a, b, c = rat(a), rat(b), rat(c)
    t = a * a + b * b + c * c
    d = 1 + t
    return Quaternion((1 - t) / d, 2 * a / d, 2 * b / d, 2 * c / d)


def random_rational_unit(rng) -> Quaternion:
    """Random exact unit quaternion (rng: random.Random)."""
    v = [rat(rng.randint(-8, 8), rng.randint(1, 8)) for _ in range(3)]
    q = rational_unit(*v)
    return -q if rng.random() < 0.5 else q


def right_mul_matrix(g: Quaternion) -> list[list]:
    """Rows M with (v*g)_c = sum_d M[c][d] * v_d."""
    gw, gx, gy, gz = g
    return [
        [gw, -gx, -gy, -gz],
        [gx, gw, gz, -gy],
        [gy, -gz, gw, gx],
        [gz, gy, -gx, gw],
    ]


def left_mul_matrix(g: Quaternion) -> list[list]:
    """Rows M with (g*v)_c = sum_d M[c][d] * v_d."""
    gw, gx, gy, gz = g
    return [
        [gw, -gx, -gy, -gz],
        [gx, gw, -gz, gy],
        [gy, gz, gw, -gx],
        [gz, -gy, gx, gw],
    ]
