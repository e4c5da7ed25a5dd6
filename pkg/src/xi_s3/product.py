"""Spectral data model on S3 x S3.

Functions on the product sphere are 8-variable polynomials split into an
x block and a y block. Their double spherical-harmonic expansions are
held as SpectralCoeffs: per-block coefficient matrices over the tensor
products of the orthogonal single-sphere bases, with the Gram weights of
those bases baked into every norm and pairing. Blocks with k, l <= N form
the truncation on which all operator identities become finite statements.
"""

from __future__ import annotations

import math
import random

import numpy as np

from .rational import Q, ZERO, rat, rat_to_json, rat_from_json
from .poly import (
    MultiPoly,
    integrate_product_over_block,
    reduce_on_sphere,
    sphere_inner,
    sphere_integral,
)
from .harmonics import X8, Y8, harmonic_basis


class TruncationError(ValueError):
    """Analysis truncation too small: synthesis left a nonzero residual."""


def bipoly(px: MultiPoly, py: MultiPoly) -> MultiPoly:
    """Tensor product u(x) v(y) as an 8-variable polynomial."""
    return px.lift(8, 0) * py.lift(8, 4)


def bidegree(f: MultiPoly) -> tuple:
    """(x-degree, y-degree) of an 8-variable polynomial."""
    dx = max((sum(e[:4]) for e in f.terms), default=-1)
    dy = max((sum(e[4:]) for e in f.terms), default=-1)
    return dx, dy


def reduce_biblock(f: MultiPoly) -> MultiPoly:
    """Canonical representative modulo |x|^2 = |y|^2 = 1."""
    return reduce_on_sphere(reduce_on_sphere(f, X8), Y8)


def gram_floats(k: int) -> np.ndarray:
    return np.array([float(g) for g in harmonic_basis(k).gram_diag])


class SpectralCoeffs:
    """Truncated double harmonic expansion; exact or float backend.

    blocks maps (k, l) to a (k+1)^2 x (l+1)^2 coefficient matrix: nested
    tuples of rationals in exact mode, a float ndarray in float mode.
    Missing blocks are zero. Instances are immutable by convention.
    """

    __slots__ = ("N", "mode", "blocks")

    def __init__(self, N: int, mode: str = "exact", blocks: dict | None = None):
        if mode not in ("exact", "float"):
            raise ValueError("mode must be 'exact' or 'float'")
        self.N = N
        self.mode = mode
        clean: dict = {}
        if blocks:
            for (k, l), mat in blocks.items():
                if not (0 <= k <= N and 0 <= l <= N):
                    raise ValueError(f"block ({k},{l}) outside truncation {N}")
                dk, dl = (k + 1) ** 2, (l + 1) ** 2
                if mode == "float":
                    arr = np.asarray(mat, dtype=np.float64)
                    if arr.shape != (dk, dl):
                        raise ValueError(f"block ({k},{l}) has shape {arr.shape}")
                    if np.any(arr):
                        clean[(k, l)] = arr
                else:
                    rows = tuple(tuple(c if isinstance(c, type(ZERO)) else rat(c)
                                       for c in row) for row in mat)
                    if len(rows) != dk or any(len(r) != dl for r in rows):
                        raise ValueError(f"block ({k},{l}) has wrong shape")
                    if any(c != 0 for row in rows for c in row):
                        clean[(k, l)] = rows
        self.blocks = clean

    # -- construction helpers ------------------------------------------------

    @classmethod
    def zeros(cls, N: int, mode: str = "exact") -> "SpectralCoeffs":
        return cls(N, mode)

    def with_block(self, k: int, l: int, mat) -> "SpectralCoeffs":
        blocks = dict(self.blocks)
        blocks[(k, l)] = mat
        return SpectralCoeffs(self.N, self.mode, blocks)

    def block(self, k: int, l: int):
        """Stored block or a fresh zero matrix of the right shape."""
        got = self.blocks.get((k, l))
        if got is not None:
            return got
        dk, dl = (k + 1) ** 2, (l + 1) ** 2
        if self.mode == "float":
            return np.zeros((dk, dl))
        return tuple((ZERO,) * dl for _ in range(dk))

    def is_zero(self) -> bool:
        return not self.blocks

    def __eq__(self, other):
        if not isinstance(other, SpectralCoeffs):
            return NotImplemented
        if self.N != other.N or self.mode != other.mode:
            return False
        if self.mode == "exact":
            return self.blocks == other.blocks
        keys = set(self.blocks) | set(other.blocks)
        return all(np.array_equal(self.block(*kl), other.block(*kl)) for kl in keys)

    def __repr__(self):
        return (f"SpectralCoeffs(N={self.N}, mode={self.mode}, "
                f"nonzero_blocks={sorted(self.blocks)})")

    # -- arithmetic ------------------------------------------------------------

    def map_blocks(self, fn) -> "SpectralCoeffs":
        """New coefficients with fn(k, l, matrix) applied to each block."""
        out = {}
        for (k, l), mat in self.blocks.items():
            out[(k, l)] = fn(k, l, mat)
        return SpectralCoeffs(self.N, self.mode, out)

    def scale_block(self, k: int, l: int, factor):
        mat = self.blocks[(k, l)]
        if self.mode == "float":
            return mat * float(factor)
        return tuple(tuple(c * factor for c in row) for row in mat)

    def __add__(self, other: "SpectralCoeffs") -> "SpectralCoeffs":
        if self.N != other.N or self.mode != other.mode:
            raise ValueError("mismatched coefficients")
        out = dict(self.blocks)
        for kl, mat in other.blocks.items():
            if kl in out:
                if self.mode == "float":
                    out[kl] = out[kl] + mat
                else:
                    out[kl] = tuple(tuple(a + b for a, b in zip(r1, r2))
                                    for r1, r2 in zip(out[kl], mat))
            else:
                out[kl] = mat
        return SpectralCoeffs(self.N, self.mode, out)

    def __sub__(self, other: "SpectralCoeffs") -> "SpectralCoeffs":
        return self + other.scale(-1)

    def scale(self, c) -> "SpectralCoeffs":
        if self.mode == "float":
            return self.map_blocks(lambda k, l, m: m * float(c))
        cc = c if isinstance(c, type(ZERO)) else rat(c)
        return self.map_blocks(lambda k, l, m: tuple(tuple(x * cc for x in row)
                                                     for row in m))

    def to_float(self) -> "SpectralCoeffs":
        if self.mode == "float":
            return self
        out = {kl: np.array([[float(c) for c in row] for row in mat])
               for kl, mat in self.blocks.items()}
        return SpectralCoeffs(self.N, "float", out)

    # -- serialization ---------------------------------------------------------

    def to_json(self) -> dict:
        blocks = {}
        for (k, l), mat in sorted(self.blocks.items()):
            if self.mode == "float":
                blocks[f"{k},{l}"] = [[float(c) for c in row] for row in mat]
            else:
                blocks[f"{k},{l}"] = [[rat_to_json(c) for c in row] for row in mat]
        return {"N": self.N, "blocks": blocks}

    @classmethod
    def from_json(cls, d: dict) -> "SpectralCoeffs":
        mode = "exact"
        for mat in d["blocks"].values():
            for row in mat:
                for c in row:
                    mode = "exact" if isinstance(c, (list, tuple)) else "float"
                    break
                break
            break
        blocks = {}
        for key, mat in d["blocks"].items():
            k, l = (int(s) for s in key.split(","))
            if mode == "exact":
                blocks[(k, l)] = [[rat_from_json(c) for c in row] for row in mat]
            else:
                blocks[(k, l)] = np.asarray(mat, dtype=np.float64)
        return cls(int(d["N"]), mode, blocks)


# -- analysis / synthesis -----------------------------------------------------


def analyze(f: MultiPoly, N: int, mode: str = "exact") -> SpectralCoeffs:
    """Double harmonic expansion of an 8-variable polynomial, exact.

    Coefficients are inner products against the basis tensors divided by
    both Gram weights, computed by iterated sphere integration. Raises
    TruncationError when N is smaller than the bidegree content of f
    (detected by a nonzero synthesis residual, never silently dropped).
    """
    if f.nvars != 8:
        raise ValueError("analyze expects an 8-variable polynomial")
    blocks: dict = {}
    for k in range(N + 1):
        bx = harmonic_basis(k)
        partials = []
        for yi, gi in zip(bx.elements, bx.gram_diag):
            h = integrate_product_over_block(f, yi.lift(8, 0), X8)
            partials.append((h, gi))
        if all(h.is_zero() for h, _ in partials):
            continue
        for l in range(N + 1):
            by = harmonic_basis(l)
            mat = []
            nonzero = False
            for h, gi in partials:
                row = []
                for yj, gj in zip(by.elements, by.gram_diag):
                    if h.is_zero():
                        row.append(ZERO)
                        continue
                    val = sphere_inner(h, yj) / (gi * gj)
                    if val:
                        nonzero = True
                    row.append(val)
                mat.append(tuple(row))
            if nonzero:
                blocks[(k, l)] = tuple(mat)
    c = SpectralCoeffs(N, "exact", blocks)
    residual = reduce_biblock(synthesize(c) - f)
    if not residual.is_zero():
        raise TruncationError(
            f"truncation N={N} too small: residual of bidegree {bidegree(residual)}")
    return c.to_float() if mode == "float" else c


def synthesize(c: SpectralCoeffs) -> MultiPoly:
    """Sum of a_kl[i][j] * Y_i(x) Y_j(y) over all stored blocks (exact mode)."""
    if c.mode != "exact":
        raise ValueError("synthesize needs exact coefficients")
    total = MultiPoly.zero(8)
    for (k, l), mat in sorted(c.blocks.items()):
        bx = harmonic_basis(k)
        by = harmonic_basis(l)
        for i, yi in enumerate(bx.elements):
            xi = yi.lift(8, 0)
            for j, yj in enumerate(by.elements):
                a = mat[i][j]
                if a:
                    total = total + (xi * yj.lift(8, 4)).scale(a)
    return total


def project_Ekl(c: SpectralCoeffs, k: int, l: int) -> SpectralCoeffs:
    """Orthogonal projection onto the (k, l) block: zero out all others."""
    if not (0 <= k <= c.N and 0 <= l <= c.N):
        raise ValueError(f"block ({k},{l}) outside truncation N={c.N}")
    keep = c.blocks.get((k, l))
    return SpectralCoeffs(c.N, c.mode, {(k, l): keep} if keep is not None else {})


# -- norms and pairings --------------------------------------------------------


def sobolev_weight(k: int, l: int) -> int:
    """Block weight 1 + k(k+2) + l(l+2) of the (1 - Delta_x - Delta_y) norm."""
    return 1 + k * (k + 2) + l * (l + 2)


def block_norm_sq(c: SpectralCoeffs, k: int, l: int):
    """Gram-weighted squared norm of one block (exact in exact mode)."""
    mat = c.blocks.get((k, l))
    if mat is None:
        return Q(0) if c.mode == "exact" else 0.0
    if c.mode == "float":
        gx, gy = gram_floats(k), gram_floats(l)
        return float(np.einsum("ij,i,j->", mat * mat, gx, gy))
    gx = harmonic_basis(k).gram_diag
    gy = harmonic_basis(l).gram_diag
    total = Q(0)
    for i, row in enumerate(mat):
        for j, a in enumerate(row):
            if a:
                total += a * a * gx[i] * gy[j]
    return total


def inner(c: SpectralCoeffs, d: SpectralCoeffs):
    """Gram-weighted L2 pairing of two coefficient sets (same mode)."""
    if c.mode != d.mode:
        raise ValueError("mode mismatch")
    total = Q(0) if c.mode == "exact" else 0.0
    for kl in set(c.blocks) & set(d.blocks):
        k, l = kl
        a, b = c.blocks[kl], d.blocks[kl]
        if c.mode == "float":
            gx, gy = gram_floats(k), gram_floats(l)
            total += float(np.einsum("ij,ij,i,j->", a, b, gx, gy))
        else:
            gx = harmonic_basis(k).gram_diag
            gy = harmonic_basis(l).gram_diag
            for i, row in enumerate(a):
                for j, x in enumerate(row):
                    if x and b[i][j]:
                        total += x * b[i][j] * gx[i] * gy[j]
    return total


def sobolev_norm_sq(c: SpectralCoeffs, s: int):
    """Exact squared Sobolev norm for integer order s >= 0."""
    if not isinstance(s, int) or s < 0:
        raise ValueError("exact Sobolev norms require integer s >= 0")
    total = Q(0) if c.mode == "exact" else 0.0
    for (k, l) in c.blocks:
        w = sobolev_weight(k, l) ** s
        total += block_norm_sq(c, k, l) * w
    return total


def sobolev_norm(c: SpectralCoeffs, s: float) -> float:
    """Sobolev norm of order s >= 0 with block weights (1+k(k+2)+l(l+2))^s."""
    if s < 0:
        raise ValueError("s must be >= 0")
    total = 0.0
    for (k, l) in c.blocks:
        total += float(block_norm_sq(c, k, l)) * sobolev_weight(k, l) ** float(s)
    return math.sqrt(total)


def l2_norm_sq_poly(f: MultiPoly):
    """Exact squared L2 norm of an 8-variable polynomial on S3 x S3."""
    fy = integrate_product_over_block(f, f, X8)
    return sphere_integral(fy, (0, 1, 2, 3)).constant_value()


# -- random data for tests and trials ------------------------------------------


def random_coeffs(N: int, seed: int, mode: str = "exact",
                  density: float = 0.6, off_diagonal_only: bool = False,
                  diagonal_only: bool = False) -> SpectralCoeffs:
    """Deterministic random coefficients; small rationals in exact mode."""
    rng = random.Random(seed)
    blocks = {}
    for k in range(N + 1):
        for l in range(N + 1):
            if off_diagonal_only and k == l:
                continue
            if diagonal_only and k != l:
                continue
            dk, dl = (k + 1) ** 2, (l + 1) ** 2
            mat = [[Q(0)] * dl for _ in range(dk)]
            nonzero = False
            for i in range(dk):
                for j in range(dl):
                    if rng.random() < density:
                        mat[i][j] = Q(rng.randint(-9, 9), rng.randint(1, 9))
                        nonzero = nonzero or mat[i][j] != 0
            if nonzero:
                blocks[(k, l)] = mat
    c = SpectralCoeffs(N, "exact", blocks)
    return c.to_float() if mode == "float" else c
