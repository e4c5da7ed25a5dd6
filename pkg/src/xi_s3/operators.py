"""The group-averaging operator, the ultrahyperbolic operator, and the
verification machinery tying them together.

The averaging operator T f(x, y) = integral over the group of f(xg, gy)
is realized three independent ways:

* symbolically, by exact expansion of f(xg, gy) in twelve variables
  followed by exact integration over the g block;
* spectrally, as a Fourier multiplier that kills every block with
  k != l and acts on the diagonal block (k, k) by 1/(k+1) times a
  reflection, with the reflection matrices extracted column by column
  from the symbolic route (exact) or by translation-matrix quadrature
  (float);
* through the zonal kernel, by float quadrature of f against
  Z(conj(x') x y', y).

The ultrahyperbolic operator acts blockwise by l(l+2) - k(k+2). The
exactness report verifies, on the whole truncated space, that each
operator's kernel is exactly the other's image.
"""

from __future__ import annotations

import math
import os
import threading
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .rational import Q, ZERO, rat_to_json
from .poly import (
    DegreeCapError,
    MultiPoly,
    get_degree_cap,
    integrate_product_over_block,
)
from .quaternion import Quaternion, haar_array
from .harmonics import harmonic_basis, zonal
from .product import (
    SpectralCoeffs,
    analyze,
    bidegree,
    gram_floats,
    random_coeffs,
    reduce_biblock,
    sobolev_norm,
    sobolev_norm_sq,
    sobolev_weight,
)
from .quadrature import QuadratureRule, product_rule, rule_for_degree

X12 = (0, 1, 2, 3)
G12 = (4, 5, 6, 7)
Y12 = (8, 9, 10, 11)

DEFAULT_EXACT_DEGREE_CAP = 3
DEFAULT_FLOAT_DEGREE_CAP = 6
FLOAT_TOL = 1e-9


class OperatorContractError(AssertionError):
    """An exactly-verifiable operator identity failed; this would
    contradict the multiplier structure and is always a hard error."""


class NotInKernelError(ValueError):
    """Input to solve_box has a nonzero diagonal block."""


# -- symbolic realization ------------------------------------------------------

_XG_POWERS: dict = {}
_GY_POWERS: dict = {}
_COMPOSE_LOCK = threading.Lock()


def _product_coordinate(side: str, c: int) -> MultiPoly:
    """Coordinate c of x*g (side "right") or g*y (side "left") as a
    bilinear 12-variable polynomial."""
    terms = {}
    # Hamilton product component tables: (sign, a-index, b-index)
    tables = {
        0: [(1, 0, 0), (-1, 1, 1), (-1, 2, 2), (-1, 3, 3)],
        1: [(1, 0, 1), (1, 1, 0), (1, 2, 3), (-1, 3, 2)],
        2: [(1, 0, 2), (-1, 1, 3), (1, 2, 0), (1, 3, 1)],
        3: [(1, 0, 3), (1, 1, 2), (-1, 2, 1), (1, 3, 0)],
    }
    for sign, ai, bi in tables[c]:
        exp = [0] * 12
        if side == "right":      # a = x block, b = g block
            exp[ai] += 1
            exp[4 + bi] += 1
        else:                    # a = g block, b = y block
            exp[4 + ai] += 1
            exp[8 + bi] += 1
        terms[tuple(exp)] = Q(sign)
    return MultiPoly(12, terms)


def _xg_power(alpha: tuple) -> MultiPoly:
    """(x*g)^alpha as an exact 12-variable polynomial, cached."""
    got = _XG_POWERS.get(alpha)
    if got is None:
        p = MultiPoly.constant(12, 1)
        for c, e in enumerate(alpha):
            if e:
                p = p * _product_coordinate("right", c) ** e
        with _COMPOSE_LOCK:
            got = _XG_POWERS.setdefault(alpha, p)
    return got


def _gy_power(beta: tuple) -> MultiPoly:
    """(g*y)^beta as an exact 12-variable polynomial, cached."""
    got = _GY_POWERS.get(beta)
    if got is None:
        p = MultiPoly.constant(12, 1)
        for c, e in enumerate(beta):
            if e:
                p = p * _product_coordinate("left", c) ** e
        with _COMPOSE_LOCK:
            got = _GY_POWERS.setdefault(beta, p)
    return got


def _compose_right(u: MultiPoly) -> MultiPoly:
    """u(x*g) for a 4-variable polynomial u."""
    total = MultiPoly.zero(12)
    for exp, coef in u.terms.items():
        total = total + _xg_power(exp).scale(coef)
    return total


def _compose_left(v: MultiPoly) -> MultiPoly:
    """v(g*y) for a 4-variable polynomial v."""
    total = MultiPoly.zero(12)
    for exp, coef in v.terms.items():
        total = total + _gy_power(exp).scale(coef)
    return total


def xi_on_product(u: MultiPoly, v: MultiPoly) -> MultiPoly:
    """T(u tensor v): exact integral over g of u(xg) v(gy), reduced on
    both spheres. Fast path used for operator-matrix columns."""
    if not (u.is_zero() or v.is_zero()):
        _check_expansion_degree(u.degree() + v.degree())
    out = integrate_product_over_block(_compose_right(u), _compose_left(v), G12)
    return reduce_biblock(out)


def _check_expansion_degree(degree: int) -> None:
    # the 12-variable expansion of a bidegree-(dx, dy) term has total
    # degree 2(dx + dy); enforce the configured cap on that intermediate
    if 2 * degree > get_degree_cap():
        raise DegreeCapError(
            f"group-product expansion degree {2 * degree} exceeds cap "
            f"{get_degree_cap()}")


def xi_symbolic(f: MultiPoly) -> MultiPoly:
    """Exact symbolic realization of the averaging operator on an
    8-variable polynomial: expand f(xg, gy), integrate out the g block
    against the uniform measure, reduce modulo both unit spheres."""
    if f.nvars != 8:
        raise ValueError("xi_symbolic expects an 8-variable polynomial")
    if f.terms:
        _check_expansion_degree(max(sum(e) for e in f.terms))
    # group terms by x-monomial: T f = sum_alpha \int (xg)^alpha f_alpha(gy)
    by_alpha: dict = {}
    for exp, coef in f.terms.items():
        by_alpha.setdefault(exp[:4], {})[exp[4:]] = coef
    total = MultiPoly.zero(8)
    for alpha, ybody in sorted(by_alpha.items()):
        s = MultiPoly.zero(12)
        for beta, coef in ybody.items():
            s = s + _gy_power(beta).scale(coef)
        total = total + integrate_product_over_block(_xg_power(alpha), s, G12)
    return reduce_biblock(total)


# -- block operator reports ----------------------------------------------------


@dataclass
class BlockOperatorReport:
    """Matrix data and verdicts for the averaging operator on one diagonal
    block. matrix_T maps coefficient vectors indexed by basis pairs
    (row p*dim+q, column i*dim+j); the reflection factor is (k+1) times it."""

    degree: int
    mode: str
    lam: object
    matrix_T: object
    t_square_ok: bool
    involution_ok: bool
    self_adjoint_ok: bool
    eig_plus: int
    eig_minus: int
    reflection_norm: float
    build_seconds: float

    @property
    def dim(self) -> int:
        return (self.degree + 1) ** 2

    def matrix_R(self):
        if self.mode == "float":
            return self.matrix_T * (self.degree + 1)
        k1 = Q(self.degree + 1)
        return tuple(tuple(c * k1 for c in row) for row in self.matrix_T)

    def matrix_float(self) -> np.ndarray:
        if self.mode == "float":
            return self.matrix_T
        return np.array([[float(c) for c in row] for row in self.matrix_T])

    def to_json(self) -> dict:
        if self.mode == "float":
            mat = [[float(c) for c in row] for row in self.matrix_T]
            lam = float(self.lam)
        else:
            mat = [[rat_to_json(c) for c in row] for row in self.matrix_T]
            lam = rat_to_json(self.lam)
        return {
            "degree": self.degree,
            "mode": self.mode,
            "lambda": lam,
            "matrix_T": mat,
            "verdicts": {
                "t_square": self.t_square_ok,
                "involution": self.involution_ok,
                "self_adjoint": self.self_adjoint_ok,
            },
            "eig_multiplicities": {"plus": self.eig_plus, "minus": self.eig_minus},
            "reflection_norm": self.reflection_norm,
            "build_seconds": round(self.build_seconds, 3),
        }


_REFLECTION_CACHE: dict = {}
_REFLECTION_LOCK = threading.Lock()
_FLOAT_MATRIX_CACHE: dict = {}
_TRANSLATION_CACHE: dict = {}


def clear_caches() -> None:
    _REFLECTION_CACHE.clear()
    _FLOAT_MATRIX_CACHE.clear()
    _TRANSLATION_CACHE.clear()


def _pair_gram(k: int) -> list:
    """Gram weights of the tensor basis pairs, flattened (exact)."""
    g = harmonic_basis(k).gram_diag
    return [gi * gj for gi in g for gj in g]


def _column_exact(k: int, i: int, j: int) -> list:
    """Exact coefficient column of T on basis pair (i, j) of block (k, k).

    The transform output is re-analyzed; support outside block (k, k)
    is a contract violation and raises.
    """
    basis = harmonic_basis(k)
    out = xi_on_product(basis.elements[i], basis.elements[j])
    coeffs = analyze(out, k) if not out.is_zero() else None
    d = basis.dim
    col = [ZERO] * (d * d)
    if coeffs is None:
        return col
    for (kk, ll), mat in coeffs.blocks.items():
        if (kk, ll) != (k, k):
            raise OperatorContractError(
                f"averaging a block-({k},{k}) element produced content in "
                f"block ({kk},{ll})")
    mat = coeffs.blocks.get((k, k))
    if mat is not None:
        for p in range(d):
            for q in range(d):
                col[p * d + q] = mat[p][q]
    return col


def _extract_exact(k: int) -> BlockOperatorReport:
    t0 = time.time()
    basis = harmonic_basis(k)
    d = basis.dim
    n = d * d
    threads = int(os.environ.get("XI_S3_THREADS", "1") or "1")
    pairs = [(i, j) for i in range(d) for j in range(d)]
    if threads > 1 and hasattr(os, "fork"):
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as pool:
            cols = list(pool.map(_column_task, [(k, i, j) for i, j in pairs],
                                 chunksize=max(1, n // (4 * threads))))
        cols = [[Q(a) / Q(b) for a, b in col] for col in cols]
    else:
        cols = [_column_exact(k, i, j) for i, j in pairs]
    # columns were computed per input pair; transpose into row-major rows
    matrix = tuple(tuple(cols[c][r] for c in range(n)) for r in range(n))

    lam = Q(1, k + 1)
    lam2 = lam * lam
    rows_sparse = [[(t, val) for t, val in enumerate(row) if val] for row in matrix]
    for r in range(n):
        for c in range(n):
            acc = Q(0)
            for t, val in rows_sparse[r]:
                mtc = matrix[t][c]
                if mtc:
                    acc += val * mtc
            target = lam2 if r == c else ZERO
            if acc != target:
                raise OperatorContractError(
                    f"T^2 != lambda^2 Id on block ({k},{k}) at entry ({r},{c})")
    pg = _pair_gram(k)
    for r in range(n):
        for c in range(n):
            if matrix[r][c] * pg[r] != matrix[c][r] * pg[c]:
                raise OperatorContractError(
                    f"T is not self-adjoint on block ({k},{k}) at entry ({r},{c})")

    mf = np.array([[float(v) for v in row] for row in matrix]) * (k + 1)
    plus, minus, rnorm = _reflection_spectrum(mf, pg)
    return BlockOperatorReport(
        degree=k, mode="exact", lam=lam, matrix_T=matrix,
        t_square_ok=True, involution_ok=True, self_adjoint_ok=True,
        eig_plus=plus, eig_minus=minus, reflection_norm=rnorm,
        build_seconds=time.time() - t0)


def _column_task(args):
    k, i, j = args
    col = _column_exact(k, i, j)
    return [(int(v.numerator), int(v.denominator)) for v in col]


def _reflection_spectrum(refl_float: np.ndarray, pair_gram) -> tuple:
    """(multiplicity of +norm, of -norm, spectral norm) of the reflection
    factor, from a float eigensolve in the Gram-weighted inner product."""
    w = np.sqrt(np.array([float(g) for g in pair_gram]))
    sym = (w[:, None] * refl_float) / w[None, :]
    sym = 0.5 * (sym + sym.T)
    eigs = np.linalg.eigvalsh(sym)
    plus = int(np.sum(eigs > 0))
    minus = int(np.sum(eigs < 0))
    return plus, minus, float(np.max(np.abs(eigs)))


# -- float realization via translation matrices --------------------------------


def _translation_stack(k: int, rule: QuadratureRule, side: str) -> np.ndarray:
    """Stack of matrices of right translation (side "right": u -> u(. g))
    or left translation (side "left": u -> u(g .)) on the degree-k
    harmonics, one per quadrature node g, computed by projecting the
    translated basis back onto the basis with the same rule."""
    key = (k, rule.order, side)
    cached = _TRANSLATION_CACHE.get(key)
    if cached is not None:
        return cached
    basis = harmonic_basis(k)
    d = basis.dim
    nodes = rule.nodes
    n = len(nodes)
    exps, coefs, offsets = kernels.pack_polys(basis.elements)
    base_vals = kernels.eval_poly_packed(nodes, exps, coefs, offsets)  # (n, d)
    proj = (base_vals * rule.weights[:, None]) / gram_floats(k)[None, :]  # (n, d)
    out = np.empty((n, d, d))
    chunk = max(1, (1 << 22) // (n * d))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        g_rep = np.repeat(nodes[lo:hi], n, axis=0)
        x_tile = np.tile(nodes, (hi - lo, 1))
        if side == "right":
            pts = kernels.hamilton(x_tile, g_rep)   # x * g
        else:
            pts = kernels.hamilton(g_rep, x_tile)   # g * y
        vals = kernels.eval_poly_packed(np.ascontiguousarray(pts), exps, coefs,
                                        offsets).reshape(hi - lo, n, d)
        # out[m, p, i] = sum_n proj[n, p] * Y_i(transformed point)
        out[lo:hi] = np.einsum("np,mni->mpi", proj, vals, optimize=True)
    return _TRANSLATION_CACHE.setdefault(key, out)


def float_matrix_T(k: int, order: int | None = None) -> np.ndarray:
    """Float matrix of the averaging operator on block (k, k) by pure
    quadrature (independent of the exact route); cached per degree."""
    got = _FLOAT_MATRIX_CACHE.get(k)
    if got is not None:
        return got
    rule = rule_for_degree(2 * k) if order is None else product_rule(order)
    if rule.exact_degree < 2 * k:
        raise ValueError(
            f"quadrature order {rule.order} (degree {rule.exact_degree}) "
            f"is too low for block degree {k}")
    right = _translation_stack(k, rule, "right")
    left = _translation_stack(k, rule, "left")
    wright = right * rule.weights[:, None, None]
    d = (k + 1) ** 2
    mat = np.tensordot(wright, left, axes=([0], [0]))  # (p, i, q, j)
    mat = mat.transpose(0, 2, 1, 3).reshape(d * d, d * d)
    _FLOAT_MATRIX_CACHE[k] = mat
    return mat


def float_cross_block_norm(k: int, l: int) -> float:
    """Max |entry| of the float matrix of the averaging operator from
    block (k, l); should vanish for k != l (annihilation, float shadow)."""
    rule = rule_for_degree(2 * max(k, l))
    right = _translation_stack(k, rule, "right")
    left = _translation_stack(l, rule, "left")
    wright = right * rule.weights[:, None, None]
    mat = np.tensordot(wright, left, axes=([0], [0]))
    return float(np.max(np.abs(mat)))


def _extract_float(k: int, order: int | None = None) -> BlockOperatorReport:
    t0 = time.time()
    mat = float_matrix_T(k, order)
    lam = 1.0 / (k + 1)
    t2 = mat @ mat
    d2 = mat.shape[0]
    t_square_err = float(np.max(np.abs(t2 - lam * lam * np.eye(d2))))
    refl = mat * (k + 1)
    inv_err = float(np.max(np.abs(refl @ refl - np.eye(d2))))
    pg = [float(g) for g in _pair_gram(k)]
    garr = np.array(pg)
    adj_err = float(np.max(np.abs(mat * garr[:, None] - (mat * garr[:, None]).T)))
    plus, minus, rnorm = _reflection_spectrum(refl, pg)
    scale = max(1.0, float(np.max(np.abs(mat))))
    return BlockOperatorReport(
        degree=k, mode="float", lam=lam, matrix_T=mat,
        t_square_ok=t_square_err <= FLOAT_TOL * scale,
        involution_ok=inv_err <= FLOAT_TOL * (k + 1) ** 2,
        self_adjoint_ok=adj_err <= FLOAT_TOL,
        eig_plus=plus, eig_minus=minus, reflection_norm=rnorm,
        build_seconds=time.time() - t0)


def extract_reflection(k: int, mode: str = "exact",
                       exact_cap: int = DEFAULT_EXACT_DEGREE_CAP,
                       order: int | None = None) -> BlockOperatorReport:
    """Operator matrix, multiplier and reflection verdicts for block (k, k).

    Exact mode computes the matrix column by column through the symbolic
    transform and asserts T^2 = Id/(k+1)^2, the reflection involution and
    self-adjointness in rational arithmetic (failures raise). Float mode
    extracts the matrix by translation-matrix quadrature and checks the
    same identities within 1e-9. Eigenvalue multiplicities of the
    reflection are reported from a float eigensolve, never asserted.
    Reports are cached per (degree, mode).
    """
    key = (k, mode)
    got = _REFLECTION_CACHE.get(key)
    if got is not None:
        return got
    if mode == "exact":
        if k > exact_cap:
            raise ValueError(
                f"exact reflection extraction capped at degree {exact_cap} "
                f"(requested {k}); use float mode")
        report = _extract_exact(k)
    elif mode == "float":
        report = _extract_float(k, order)
    else:
        raise ValueError("mode must be 'exact' or 'float'")
    with _REFLECTION_LOCK:
        return _REFLECTION_CACHE.setdefault(key, report)


def _spectral_norm_sym(sym: np.ndarray, iters: int = 60, seed: int = 7) -> float:
    """Spectral norm of a symmetric matrix by power iteration on its square
    (robust to the +/- eigenvalue split of reflections)."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=sym.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = sym @ (sym @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new_est = math.sqrt(nw)
        v = w / nw
        if abs(new_est - est) <= 1e-14 * max(1.0, est):
            return new_est
        est = new_est
    return est


def reflection_norm(k: int, exact_cap: int = DEFAULT_EXACT_DEGREE_CAP) -> float:
    """Spectral norm of the reflection factor on block (k, k): from the
    cached exact matrix when available, else from the float matrix."""
    got = _REFLECTION_CACHE.get((k, "exact")) or _REFLECTION_CACHE.get((k, "float"))
    if got is not None:
        return got.reflection_norm
    if k <= exact_cap:
        return extract_reflection(k, "exact").reflection_norm
    mat = float_matrix_T(k) * (k + 1)
    w = np.sqrt(np.array([float(g) for g in _pair_gram(k)]))
    sym = (w[:, None] * mat) / w[None, :]
    return _spectral_norm_sym(0.5 * (sym + sym.T))


# -- spectral realization -------------------------------------------------------


def _block_matrix(k: int, mode: str):
    """Matrix of the averaging operator on block (k, k) without forcing a
    full verdict report (float matrices are cached independently)."""
    if mode == "exact":
        return extract_reflection(k, "exact").matrix_T
    rep = _REFLECTION_CACHE.get((k, "float"))
    return rep.matrix_T if rep is not None else float_matrix_T(k)


def xi_spectral(c: SpectralCoeffs) -> SpectralCoeffs:
    """Averaging operator as a Fourier multiplier: kills every block with
    k != l and applies the cached block matrix on each diagonal block.
    Exact coefficients use the exact matrices (available up to the exact
    extraction cap), float coefficients the quadrature-extracted ones."""
    blocks = {}
    for (k, l), mat in c.blocks.items():
        if k != l:
            continue
        d = (k + 1) ** 2
        if c.mode == "float":
            vec = np.asarray(mat).reshape(d * d)
            blocks[(k, l)] = (_block_matrix(k, "float") @ vec).reshape(d, d)
        else:
            vec = [mat[i][j] for i in range(d) for j in range(d)]
            m = _block_matrix(k, "exact")
            out = [[ZERO] * d for _ in range(d)]
            for r in range(d * d):
                acc = Q(0)
                row = m[r]
                for t in range(d * d):
                    if vec[t] and row[t]:
                        acc += row[t] * vec[t]
                out[r // d][r % d] = acc
            blocks[(k, l)] = out
    return SpectralCoeffs(c.N, c.mode, blocks)


# -- zonal-kernel realization ----------------------------------------------------


def xi_zonal_kernel(f: MultiPoly, points, order: int | None = None) -> np.ndarray:
    """Averaging operator through its integral kernel: for f supported on
    one diagonal block (k, k), evaluates

        T f(x', y') = double integral of Z(conj(x') x y', y) f(x, y)

    by product quadrature at the given (x', y') points (pairs of float
    Quaternions). The block support of f is verified by exact analysis.
    """
    if f.nvars != 8:
        raise ValueError("xi_zonal_kernel expects an 8-variable polynomial")
    dx, dy = bidegree(f)
    coeffs = analyze(f, max(dx, dy, 0))
    support = sorted(coeffs.blocks)
    if len(support) != 1 or support[0][0] != support[0][1]:
        raise ValueError(
            f"input is not supported on a single diagonal block: {support}")
    k = support[0][0]
    rule = rule_for_degree(2 * k + 2) if order is None else product_rule(order)
    if rule.exact_degree < 2 * k:
        raise ValueError(
            f"quadrature order {rule.order} (degree {rule.exact_degree}) "
            f"too low for block degree {k}")

    basis = harmonic_basis(k)
    exps, coefs, offsets = kernels.pack_polys(basis.elements)
    ginv = 1.0 / gram_floats(k)
    nodes, w = rule.nodes, rule.weights
    n = len(nodes)

    f_exps, f_coefs = f.to_arrays()
    grid_pts = np.empty((n * n, 8))
    grid_pts[:, :4] = np.repeat(nodes, n, axis=0)
    grid_pts[:, 4:] = np.tile(nodes, (n, 1))
    f_grid = kernels.eval_poly(grid_pts, f_exps, f_coefs).reshape(n, n)
    wfw = (w[:, None] * f_grid) * w[None, :]

    v_vals = kernels.eval_poly_packed(nodes, exps, coefs, offsets)  # (n, d) at q_j
    right = wfw @ v_vals                                            # (n_x, d)

    conj_signs = np.array([1.0, -1.0, -1.0, -1.0])
    out = np.empty(len(points))
    for idx, (xp, yp) in enumerate(points):
        xq = (xp.to_array() if isinstance(xp, Quaternion)
              else np.asarray(xp, dtype=np.float64)) * conj_signs
        yq = yp.to_array() if isinstance(yp, Quaternion) else np.asarray(yp, dtype=np.float64)
        u = kernels.hamilton(
            kernels.hamilton(np.broadcast_to(xq, (n, 4)).copy(), nodes),
            np.broadcast_to(yq, (n, 4)).copy())
        u_vals = kernels.eval_poly_packed(np.ascontiguousarray(u), exps, coefs,
                                          offsets)  # (n, d) at conj(x') q_i y'
        out[idx] = float(np.einsum("nd,d,nd->", u_vals, ginv, right))
    return out


# -- ultrahyperbolic operator -----------------------------------------------------


def box_multiplier(k: int, l: int) -> int:
    """Eigenvalue of Delta_x - Delta_y on the (k, l) block."""
    return l * (l + 2) - k * (k + 2)


def box_apply(c: SpectralCoeffs) -> SpectralCoeffs:
    """Blockwise action of the ultrahyperbolic operator; exact."""
    return SpectralCoeffs(c.N, c.mode, {
        (k, l): c.scale_block(k, l, box_multiplier(k, l))
        for (k, l) in c.blocks if box_multiplier(k, l) != 0
    })


def solve_box(c: SpectralCoeffs) -> SpectralCoeffs:
    """Canonical preimage under the ultrahyperbolic operator for inputs
    with zero diagonal blocks (the kernel of the averaging operator):
    divides block (k, l) by l(l+2) - k(k+2), leaving diagonals zero."""
    for (k, l) in sorted(c.blocks):
        if k == l:
            raise NotInKernelError(
                f"input not in the averaging operator's kernel: nonzero "
                f"diagonal block ({k},{k})")
    return SpectralCoeffs(c.N, c.mode, {
        (k, l): c.scale_block(k, l, (Q(1) if c.mode == "exact" else 1.0)
                              / box_multiplier(k, l))
        for (k, l) in c.blocks
    })


# -- exactness of the couple ------------------------------------------------------


def annihilation_check(max_degree: int) -> dict:
    """Exact verification that the averaging operator kills every basis
    tensor Y_i x Y_j with k != l, for all k, l <= max_degree."""
    failures = []
    pairs = 0
    for k in range(max_degree + 1):
        for l in range(max_degree + 1):
            if k == l:
                continue
            bk, bl = harmonic_basis(k), harmonic_basis(l)
            for i, u in enumerate(bk.elements):
                for j, v in enumerate(bl.elements):
                    pairs += 1
                    if not xi_on_product(u, v).is_zero():
                        failures.append((k, l, i, j))
    return {"max_degree": max_degree, "pairs_checked": pairs,
            "failures": failures, "ok": not failures}


def exactness_report(N: int, mode: str = "exact", seed: int = 20260810,
                     trials: int = 5) -> dict:
    """Constructive verification of the exact couple at truncation N:

    1. kernel of T = span of off-diagonal blocks (T kills each one, and is
       injective on every diagonal block since T^2 is a nonzero multiple
       of the identity there);
    2. image of T = diagonal blocks (every b is hit by (k+1)^2 T b);
    3. kernel of the ultrahyperbolic operator = diagonal blocks (its block
       multiplier vanishes exactly when k = l);
    4. image of the ultrahyperbolic operator = off-diagonal blocks, with
       solve_box supplying exact preimages.

    Exact mode verifies 1-4 in rational arithmetic; float mode shadows
    them within 1e-9 using the quadrature-extracted matrices.
    """
    t0 = time.time()
    checks: dict = {}

    if mode == "exact":
        ann = annihilation_check(N)
        checks["kernel_T_contains_offdiag"] = ann["ok"]
        inj = all(extract_reflection(k, "exact").t_square_ok for k in range(N + 1))
        checks["T_injective_on_diag"] = inj
        hit_ok = True
        rng_c = random_coeffs(N, seed, diagonal_only=True, density=0.5)
        for k in range(N + 1):
            block = rng_c.blocks.get((k, k))
            if block is None:
                continue
            b = SpectralCoeffs(N, "exact", {(k, k): block})
            pre = xi_spectral(b).scale((k + 1) ** 2)
            hit_ok = hit_ok and (xi_spectral(pre) == b)
        checks["image_T_covers_diag"] = hit_ok
    else:
        worst = 0.0
        for k in range(N + 1):
            for l in range(N + 1):
                if k != l:
                    worst = max(worst, float_cross_block_norm(k, l))
        checks["kernel_T_contains_offdiag"] = worst <= FLOAT_TOL
        checks["offdiag_max_entry"] = worst
        inj = all(extract_reflection(k, "float").t_square_ok for k in range(N + 1))
        checks["T_injective_on_diag"] = inj
        hit_err = 0.0
        c = random_coeffs(N, seed, mode="float", diagonal_only=True, density=0.5)
        for k in range(N + 1):
            block = c.blocks.get((k, k))
            if block is None:
                continue
            b = SpectralCoeffs(N, "float", {(k, k): block})
            pre = xi_spectral(b).scale((k + 1) ** 2)
            back = xi_spectral(pre)
            hit_err = max(hit_err, float(np.max(np.abs(back.block(k, k) - np.asarray(block)))))
        checks["image_T_covers_diag"] = hit_err <= FLOAT_TOL
        checks["image_T_max_err"] = hit_err

    mult_ok = all((box_multiplier(k, l) == 0) == (k == l)
                  for k in range(N + 1) for l in range(N + 1))
    checks["kernel_box_is_diag"] = mult_ok

    box_ok = True
    err = 0.0
    for t in range(trials):
        c = random_coeffs(N, seed + 17 * t, mode=mode, off_diagonal_only=True)
        u = solve_box(c)
        back = box_apply(u)
        if mode == "exact":
            box_ok = box_ok and (back == c)
        else:
            for kl in set(c.blocks) | set(back.blocks):
                err = max(err, float(np.max(np.abs(back.block(*kl) - c.block(*kl)))))
    if mode == "float":
        box_ok = err <= FLOAT_TOL
        checks["image_box_max_err"] = err
    checks["image_box_covers_offdiag"] = box_ok

    ok = all(v for key, v in checks.items() if isinstance(v, bool))
    return {"N": N, "mode": mode, "checks": checks, "ok": ok,
            "seconds": round(time.time() - t0, 3)}


# -- kernel invariance and the multiplier witness ----------------------------------


def _zonal_grid(k: int, left_pts: np.ndarray, right_pts: np.ndarray) -> np.ndarray:
    """Matrix Z(a_i, b_j) over two point families, via the basis sum."""
    basis = harmonic_basis(k)
    exps, coefs, offsets = kernels.pack_polys(basis.elements)
    ginv = 1.0 / gram_floats(k)
    u = kernels.eval_poly_packed(np.ascontiguousarray(left_pts), exps, coefs, offsets)
    v = kernels.eval_poly_packed(np.ascontiguousarray(right_pts), exps, coefs, offsets)
    return (u * ginv[None, :]) @ v.T


def _t_square_kernel(k: int, rule: QuadratureRule, xpp, ypp, x, y) -> float:
    """K(x'', y''; x, y): the iterated-transform kernel on block (k, k),
    by double quadrature over (x', y')."""
    nodes, w = rule.nodes, rule.weights
    n = len(nodes)

    def times(fixed: np.ndarray, pts: np.ndarray, fixed_on_left: bool) -> np.ndarray:
        tile = np.broadcast_to(fixed, (n, 4)).copy()
        return kernels.hamilton(tile, pts) if fixed_on_left else kernels.hamilton(pts, tile)

    # z1[i, j] = Z(x' y'', x'' y') and z2[i, j] = Z(x y', x' y)
    # with x' -> node i, y' -> node j
    z1 = _zonal_grid(k, times(ypp, nodes, False), times(xpp, nodes, True))
    z2 = _zonal_grid(k, times(x, nodes, True), times(y, nodes, False)).T
    return float(np.einsum("i,ij,ij,j->", w, z1, z2, w))


def kernel_invariance_check(k: int, samples: int = 10, seed: int = 20260810,
                            tol: float = 1e-6) -> dict:
    """Translation invariances of the iterated-transform kernel
    K(x'', y''; x, y), checked by float quadrature at random
    configurations:

        K(x''g, y''; xg, y) = K(gx'', y''; gx, y) = K(x'', y''g; x, yg)
        = K(x'', gy''; x, gy) = K(x'', y''; x, y).

    The y-side identities mirror the x-side ones (the fourth is stated
    here in the form symmetric to the other three).
    """
    if k > 2:
        raise ValueError("kernel invariance quadrature is limited to degree <= 2")
    rule = rule_for_degree(2 * k + 2)
    pts = haar_array(seed, 5 * samples).reshape(samples, 5, 4)
    worst = 0.0
    results = []
    for s in range(samples):
        xpp, ypp, x, y, g = pts[s]
        base = _t_square_kernel(k, rule, xpp, ypp, x, y)
        ham = lambda a, b: kernels.hamilton(a[None, :], b[None, :])[0]
        variants = {
            "right_x": _t_square_kernel(k, rule, ham(xpp, g), ypp, ham(x, g), y),
            "left_x": _t_square_kernel(k, rule, ham(g, xpp), ypp, ham(g, x), y),
            "right_y": _t_square_kernel(k, rule, xpp, ham(ypp, g), x, ham(y, g)),
            "left_y": _t_square_kernel(k, rule, xpp, ham(g, ypp), x, ham(g, y)),
        }
        errs = {name: abs(v - base) / max(1.0, abs(base))
                for name, v in variants.items()}
        worst = max(worst, max(errs.values()))
        results.append({"base": base, **errs})
    return {"degree": k, "samples": samples, "max_rel_err": worst,
            "ok": worst <= tol, "results": results}


def multiplier_witness(k: int) -> dict:
    """Numerical witness for the multiplier magnitude 1/(k+1):
    (k+1)^4 lambda_k^2 equals the integral of the kernel diagonal
    K(x, y; x, y), computed here by a factorized quadruple quadrature."""
    rule = rule_for_degree(2 * k + 2)
    nodes, w = rule.nodes, rule.weights
    n = len(nodes)
    basis = harmonic_basis(k)
    d = basis.dim
    exps, coefs, offsets = kernels.pack_polys(basis.elements)
    ginv = 1.0 / gram_floats(k)
    pair_pts = kernels.hamilton(np.repeat(nodes, n, axis=0),
                                np.tile(nodes, (n, 1)))
    vals = kernels.eval_poly_packed(
        np.ascontiguousarray(pair_pts), exps, coefs, offsets).reshape(n, n, d)
    ww = np.sqrt(w)
    scaled = vals * ww[:, None, None] * ww[None, :, None]
    a = np.einsum("ijm,ijn->mn", scaled, scaled, optimize=True)
    total = float(np.einsum("mn,m,n->", a * a, ginv, ginv))
    lam2 = total / (k + 1) ** 4
    lam = math.sqrt(max(lam2, 0.0))
    expected = 1.0 / (k + 1)
    return {"degree": k, "lambda_estimate": lam, "expected": expected,
            "abs_err": abs(lam - expected), "ok": abs(lam - expected) <= 1e-8}


# -- contraction and smoothing ------------------------------------------------------


def contraction_and_smoothing_check(N: int, s: float = 0.0, trials: int = 100,
                                    seed: int = 20260810,
                                    exact_cap: int = DEFAULT_EXACT_DEGREE_CAP) -> dict:
    """L2 contraction of the averaging operator on random truncated data,
    plus the truncated operator-norm estimate from H^s to H^(s+1):

        max over k <= N of sqrt(1 + 2k(k+2)) / (k+1) * |reflection norm|,

    which stays below sqrt(2) since the reflection factors have unit norm.
    Contraction trials run exactly up to the exact matrix cap and in float
    mode beyond it.
    """
    t0 = time.time()
    n_exact = min(N, exact_cap)
    contraction_ok = True
    float_margin = 0.0
    for t in range(trials):
        if t % 2 == 0 or N <= exact_cap:
            c = random_coeffs(n_exact, seed + t, density=0.4)
            tc = xi_spectral(c)
            contraction_ok = contraction_ok and (
                sobolev_norm_sq(tc, 0) <= sobolev_norm_sq(c, 0))
        else:
            c = random_coeffs(N, seed + t, mode="float", density=0.4)
            tc = xi_spectral(c)
            margin = sobolev_norm(tc, 0) - sobolev_norm(c, 0)
            float_margin = max(float_margin, margin)
            contraction_ok = contraction_ok and margin <= 1e-9
    per_degree = {}
    estimate = 0.0
    for k in range(N + 1):
        rn = reflection_norm(k, exact_cap)
        val = math.sqrt(sobolev_weight(k, k)) / (k + 1) * rn
        per_degree[k] = {"reflection_norm": rn, "smoothing_factor": val}
        estimate = max(estimate, val)
    bound = math.sqrt(2.0)
    return {
        "N": N, "s": s, "trials": trials,
        "contraction_ok": bool(contraction_ok),
        "float_contraction_margin": float_margin,
        "operator_norm_estimate": estimate,
        "analytic_bound": bound,
        "estimate_within_bound": estimate <= bound + 1e-12,
        "per_degree": per_degree,
        "ok": bool(contraction_ok) and estimate <= bound + 1e-12,
        "seconds": round(time.time() - t0, 3),
    }
