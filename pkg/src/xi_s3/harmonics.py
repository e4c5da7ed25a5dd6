"""Spherical harmonics on a single S3.

Harmonic decomposition of homogeneous polynomials on R^4, exact orthogonal
bases of the degree-k harmonic spaces (dimension (k+1)^2), the exact
spectral action of the sphere Laplacian, zonal reproducing kernels and the
projections they induce. Bases are orthogonal but not normalized: square
roots of rationals would leave exact arithmetic, so the squared norms are
carried alongside as Gram data.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from . import kernels
from .quaternion import Quaternion, left_mul_matrix, right_mul_matrix, haar_array
from .rational import Q, ZERO
from .poly import (
    BLOCK_X4,
    MultiPoly,
    euclidean_laplacian,
    integrate_product_over_block,
    is_homogeneous,
    monomial_sphere_integral,
    monomials,
    reduce_on_sphere,
    sphere_inner,
    sphere_integral,
    substitute_linear,
)

X8 = (0, 1, 2, 3)
Y8 = (4, 5, 6, 7)


@dataclass(frozen=True)
class HarmonicBasis:
    """Orthogonal basis of the degree-k harmonic space with exact Gram data."""

    degree: int
    elements: tuple
    gram_diag: tuple

    @property
    def dim(self) -> int:
        return len(self.elements)

    def to_json(self) -> dict:
        from .rational import rat_to_json
        return {
            "degree": self.degree,
            "dim": self.dim,
            "elements": [p.to_json() for p in self.elements],
            "gram_diag": [rat_to_json(g) for g in self.gram_diag],
        }


@dataclass(frozen=True)
class ZonalKernel:
    """Reproducing kernel of the projection onto the degree-k harmonics.

    Stored as the exact 8-variable polynomial sum_i Y_i(x) Y_i(y) / |Y_i|^2
    over the orthogonal basis; symmetric in the two blocks.
    """

    degree: int
    poly: MultiPoly

    def diagonal(self) -> MultiPoly:
        """The 4-variable restriction Z(x, x)."""
        out: dict = {}
        for exp, coef in self.poly.terms.items():
            key = tuple(exp[i] + exp[4 + i] for i in range(4))
            s = out.get(key, ZERO) + coef
            if s:
                out[key] = s
            else:
                out.pop(key, None)
        return MultiPoly(4, out)

    def to_json(self) -> dict:
        return {"degree": self.degree, "poly": self.poly.to_json()}


# -- harmonic decomposition --------------------------------------------------


def harmonic_decompose(p: MultiPoly) -> list:
    """Split a homogeneous degree-k polynomial as sum |x|^(2j) p_j with each
    p_j harmonic of degree k - 2j; returns [p_0, ..., p_floor(k/2)].

    The triangular system produced by iterated Laplacians pins the pieces
    uniquely, so this is an exact back-substitution.
    """
    if p.nvars != 4:
        raise ValueError("harmonic decomposition expects 4 variables")
    if p.is_zero():
        return [p]
    if not is_homogeneous(p):
        raise ValueError("polynomial is not homogeneous")
    k = p.degree()
    jmax = k // 2
    # lap_pows[i] = Laplacian^i p
    lap_pows = [p]
    for _ in range(jmax):
        lap_pows.append(euclidean_laplacian(lap_pows[-1], BLOCK_X4))

    def cascade(j: int, i: int) -> "Q":
        # coefficient of |x|^(2(j-i)) p_j inside Laplacian^i p, using
        # Delta(|x|^(2u) h) = 4u(u + 1 + deg h) |x|^(2(u-1)) h
        m = k - 2 * j
        c = Q(1)
        for u in range(j - i + 1, j + 1):
            c *= 4 * u * (u + 1 + m)
        return c

    r2 = MultiPoly(4, {(2, 0, 0, 0): Q(1), (0, 2, 0, 0): Q(1),
                       (0, 0, 2, 0): Q(1), (0, 0, 0, 2): Q(1)})
    parts: list = [None] * (jmax + 1)
    for i in range(jmax, -1, -1):
        residual = lap_pows[i]
        for j in range(i + 1, jmax + 1):
            residual = residual - (r2 ** (j - i) * parts[j]).scale(cascade(j, i))
        parts[i] = residual / cascade(i, i)
    return parts


def harmonic_projection(p: MultiPoly) -> MultiPoly:
    """The harmonic part p_0 of a homogeneous polynomial."""
    return harmonic_decompose(p)[0]


# -- basis construction ------------------------------------------------------

_BASIS_CACHE: dict = {}
_BASIS_LOCK = threading.Lock()


def _gram_vector(v: MultiPoly, degree: int) -> dict:
    """b -> <x^b, v> over the degree-k monomials of v's parity class."""
    some_exp = next(iter(v.terms))
    parity = tuple(e & 1 for e in some_exp)
    out = {}
    for b in monomials(4, degree):
        if tuple(e & 1 for e in b) != parity:
            continue
        acc = Q(0)
        for a, c in v.terms.items():
            acc += c * monomial_sphere_integral(
                (a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]))
        if acc:
            out[b] = acc
    return out


def _pair(gram_vec: dict, u: MultiPoly):
    acc = Q(0)
    for exp, coef in u.terms.items():
        w = gram_vec.get(exp)
        if w is not None:
            acc += coef * w
    return acc


def harmonic_basis(k: int) -> HarmonicBasis:
    """Deterministic orthogonal (unnormalized) basis of the degree-k
    harmonics, built by harmonic projection of the graded-lex monomials
    followed by exact Gram-Schmidt. Cached; safe for concurrent readers.
    """
    if k < 0:
        raise ValueError("degree must be >= 0")
    cached = _BASIS_CACHE.get(k)
    if cached is not None:
        return cached
    basis: list = []
    grams: list = []
    gram_vecs: list = []
    for mono in monomials(4, k):
        h = harmonic_projection(MultiPoly.monomial(4, mono))
        v = h
        for y, g, gv in zip(basis, grams, gram_vecs):
            c = _pair(gv, v)
            if c:
                v = v - y.scale(c / g)
        if v.is_zero():
            continue
        gv = _gram_vector(v, k)
        g = _pair(gv, v)
        basis.append(v)
        grams.append(g)
        gram_vecs.append(gv)
    result = HarmonicBasis(k, tuple(basis), tuple(grams))
    if result.dim != (k + 1) ** 2:
        raise AssertionError(
            f"harmonic space at degree {k} has dimension {result.dim}, "
            f"expected {(k + 1) ** 2}")
    with _BASIS_LOCK:
        return _BASIS_CACHE.setdefault(k, result)


# -- the sphere Laplacian, exactly and numerically ---------------------------


def laplace_beltrami(p: MultiPoly, block=BLOCK_X4) -> MultiPoly:
    """Exact sphere Laplacian of p restricted to the unit sphere of a block.

    For a piece of block-degree d the radial split of the Euclidean
    Laplacian gives (Delta_R4 - d(d+2)) on the sphere; summing over the
    block-degree components and reducing yields the canonical representative.
    Variables outside the block ride along untouched.
    """
    by_deg: dict = {}
    for exp, coef in p.terms.items():
        by_deg.setdefault(sum(exp[i] for i in block), {})[exp] = coef
    total = MultiPoly.zero(p.nvars)
    for d, terms in sorted(by_deg.items()):
        comp = MultiPoly(p.nvars, terms)
        total = total + euclidean_laplacian(comp, block) - comp.scale(d * (d + 2))
    return reduce_on_sphere(total, block)


def laplace_beltrami_check(p: MultiPoly, h: float = 1e-4, n_points: int = 25,
                           seed: int = 20260810, rel_tol: float = 1e-6,
                           fd: bool = True) -> dict:
    """Verify the sphere-Laplacian eigenvalue -k(k+2) of a harmonic
    homogeneous polynomial by two independent routes.

    Route one is exact: Euclidean harmonicity plus the radial identity force
    the eigenvalue, and the symbolic sphere Laplacian is compared against
    -k(k+2) p on the sphere. Route two extends p(x/|x|) homogeneously of
    degree zero and applies a central finite-difference Euclidean Laplacian
    at Haar-random points (skipped when fd is false; the step-size error
    outgrows the tolerance at high degree). Raises on non-homogeneous or
    non-harmonic input.
    """
    if p.is_zero() or not is_homogeneous(p):
        raise ValueError("input must be a nonzero homogeneous polynomial")
    if not euclidean_laplacian(p, BLOCK_X4).is_zero():
        raise ValueError("input is not harmonic")
    k = p.degree()
    eig = -k * (k + 2)
    exact_ok = laplace_beltrami(p) == reduce_on_sphere(p.scale(eig), BLOCK_X4)
    if not fd:
        return {
            "degree": k,
            "eigenvalue": eig,
            "exact_route_ok": bool(exact_ok),
            "fd_max_rel_err": None,
            "fd_route_ok": None,
            "ok": bool(exact_ok),
        }

    pts = haar_array(seed, n_points)
    exps, coefs = p.to_arrays()

    def eval_extended(z: np.ndarray) -> np.ndarray:
        unit = z / np.linalg.norm(z, axis=1, keepdims=True)
        return kernels.eval_poly(np.ascontiguousarray(unit), exps, coefs)

    center = eval_extended(pts)
    fd = -8.0 * center / h ** 2
    for i in range(4):
        shift = np.zeros(4)
        shift[i] = h
        fd += (eval_extended(pts + shift) + eval_extended(pts - shift)) / h ** 2
    target = eig * center
    denom = np.maximum(np.abs(target), 1.0)
    fd_err = float(np.max(np.abs(fd - target) / denom))
    return {
        "degree": k,
        "eigenvalue": eig,
        "exact_route_ok": bool(exact_ok),
        "fd_max_rel_err": fd_err,
        "fd_route_ok": fd_err <= rel_tol,
        "ok": bool(exact_ok) and fd_err <= rel_tol,
    }


# -- zonal kernels -----------------------------------------------------------

_ZONAL_CACHE: dict = {}
_ZONAL_LOCK = threading.Lock()


def zonal(k: int) -> ZonalKernel:
    """The degree-k zonal kernel Z(x, y) = sum_i Y_i(x) Y_i(y) / |Y_i|^2."""
    cached = _ZONAL_CACHE.get(k)
    if cached is not None:
        return cached
    basis = harmonic_basis(k)
    total = MultiPoly.zero(8)
    for y, g in zip(basis.elements, basis.gram_diag):
        total = total + (y.lift(8, 0) * y.lift(8, 4)) / g
    result = ZonalKernel(k, total)
    with _ZONAL_LOCK:
        return _ZONAL_CACHE.setdefault(k, result)


def zonal_identity_suite(k: int) -> dict:
    """Exact verification that the squared-kernel integral, the diagonal
    integral and the diagonal value at the identity all equal (k+1)^2.

    The diagonal Z(x, x) is first proved constant on the sphere (it equals
    its identity value times |x|^(2k) as a polynomial), which turns the
    middle quantity into the integral of a constant. The squared-kernel
    integral over x is computed symbolically in y and must equal the same
    constant times |y|^(2k).
    """
    zk = zonal(k)
    target = Q((k + 1) ** 2)
    e_point = [Q(1), Q(0), Q(0), Q(0)]

    diag = zk.diagonal()
    value_at_e = diag.evaluate(e_point)
    r2k = MultiPoly(4, {(2, 0, 0, 0): Q(1), (0, 2, 0, 0): Q(1),
                        (0, 0, 2, 0): Q(1), (0, 0, 0, 2): Q(1)}) ** k
    diagonal_constant = diag == r2k.scale(value_at_e)

    integral_of_diagonal = sphere_integral(diag, BLOCK_X4).constant_value()

    sq = integrate_product_over_block(zk.poly, zk.poly, X8)  # polynomial in y
    squared_matches = sq == r2k.scale(target)
    squared_value = sq.evaluate(e_point)

    return {
        "degree": k,
        "target": target,
        "kernel_value_at_identity": value_at_e,
        "diagonal_constant_on_sphere": bool(diagonal_constant),
        "integral_of_diagonal": integral_of_diagonal,
        "squared_kernel_integral_constant": bool(squared_matches),
        "squared_kernel_integral_at_identity": squared_value,
        "ok": bool(
            diagonal_constant
            and squared_matches
            and value_at_e == target
            and integral_of_diagonal == target
            and squared_value == target
        ),
    }


def project_Ek(f: MultiPoly, k: int) -> MultiPoly:
    """Exact component of f (a 4-variable polynomial, read on the sphere)
    in the degree-k harmonics, via integration against the zonal kernel."""
    if f.nvars != 4:
        raise ValueError("project_Ek expects a 4-variable polynomial")
    return integrate_product_over_block(zonal(k).poly, f.lift(8, 4), Y8)


# -- rotations ---------------------------------------------------------------


def rotation_images(g: Quaternion, h: Quaternion, nvars: int, block) -> dict:
    """Substitution images realizing v -> g * v * h on one block."""
    lm = left_mul_matrix(g)
    rm = right_mul_matrix(h)
    comb = [[sum(lm[c][m] * rm[m][d] for m in range(4)) for d in range(4)]
            for c in range(4)]
    images = {i: MultiPoly.variable(nvars, i) for i in range(nvars)}
    for ci, c in enumerate(block):
        terms = {}
        for di, d in enumerate(block):
            if comb[ci][di]:
                exp = [0] * nvars
                exp[d] = 1
                terms[tuple(exp)] = comb[ci][di]
        images[c] = MultiPoly(nvars, terms)
    return images


def rotate(p: MultiPoly, g: Quaternion, h: Quaternion, block=BLOCK_X4) -> MultiPoly:
    """Pull back p under the special orthogonal map v -> g * v * h acting
    on the given block; exact for exact unit quaternions."""
    return substitute_linear(p, rotation_images(g, h, p.nvars, block), p.nvars)
