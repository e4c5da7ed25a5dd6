"""Float inner-loop kernels with two interchangeable backends.

The hot paths of the quadrature layer are batch polynomial evaluation and
batch Hamilton products over large node sets. Both are implemented twice:
a numba @njit version (default when numba imports) and a pure-numpy
version. Selection is via the environment variable

    XI_S3_BACKEND = auto | numba | numpy      (default: auto)

read once at import. ``numpy`` forces the fallback; ``numba`` raises if
numba is unavailable. benchmarks/bench_kernels.py compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_REQUESTED = os.environ.get("XI_S3_BACKEND", "auto").strip().lower()
if _REQUESTED not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"XI_S3_BACKEND must be auto, numba or numpy, got {_REQUESTED!r}")


# -- pure numpy implementations ----------------------------------------------


def _np_eval_poly(points: np.ndarray, exps: np.ndarray, coefs: np.ndarray) -> np.ndarray:
    """Evaluate sum_j coefs[j] * prod_d points[:, d] ** exps[j, d]."""
    n = points.shape[0]
    acc = np.zeros(n)
    for j in range(exps.shape[0]):
        m = np.full(n, coefs[j])
        for d in range(exps.shape[1]):
            e = exps[j, d]
            if e:
                m *= points[:, d] ** e
        acc += m
    return acc


def _np_eval_poly_packed(points, exps, coefs, offsets) -> np.ndarray:
    """Evaluate several packed polynomials at shared points -> (n, npolys).

    Polynomial p owns rows offsets[p]:offsets[p+1] of exps/coefs.
    """
    npolys = offsets.shape[0] - 1
    out = np.empty((points.shape[0], npolys))
    for p in range(npolys):
        lo, hi = offsets[p], offsets[p + 1]
        out[:, p] = _np_eval_poly(points, exps[lo:hi], coefs[lo:hi])
    return out


def _np_hamilton(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise Hamilton product of (n, 4) arrays."""
    aw, ax, ay, az = a[:, 0], a[:, 1], a[:, 2], a[:, 3]
    bw, bx, by, bz = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    out = np.empty_like(a)
    out[:, 0] = aw * bw - ax * bx - ay * by - az * bz
    out[:, 1] = aw * bx + ax * bw + ay * bz - az * by
    out[:, 2] = aw * by - ax * bz + ay * bw + az * bx
    out[:, 3] = aw * bz + ax * by - ay * bx + az * bw
    return out


_NUMPY_IMPLS = {
    "eval_poly": _np_eval_poly,
    "eval_poly_packed": _np_eval_poly_packed,
    "hamilton": _np_hamilton,
}


# -- numba implementations ---------------------------------------------------


def _build_numba_impls():
    # avoid the noisy TBB-version probe on hosts with an old TBB
    os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")
    from numba import njit, prange

    @njit(cache=True, parallel=True)
    def nb_eval_poly(points, exps, coefs):
        n = points.shape[0]
        t = exps.shape[0]
        d = exps.shape[1]
        out = np.empty(n)
        for i in prange(n):
            acc = 0.0
            for j in range(t):
                m = coefs[j]
                for c in range(d):
                    e = exps[j, c]
                    if e:
                        v = points[i, c]
                        p = v
                        for _ in range(e - 1):
                            p *= v
                        m *= p
                acc += m
            out[i] = acc
        return out

    @njit(cache=True, parallel=True)
    def nb_eval_poly_packed(points, exps, coefs, offsets):
        n = points.shape[0]
        d = exps.shape[1]
        npolys = offsets.shape[0] - 1
        out = np.empty((n, npolys))
        for i in prange(n):
            for p in range(npolys):
                acc = 0.0
                for j in range(offsets[p], offsets[p + 1]):
                    m = coefs[j]
                    for c in range(d):
                        e = exps[j, c]
                        if e:
                            v = points[i, c]
                            q = v
                            for _ in range(e - 1):
                                q *= v
                            m *= q
                    acc += m
                out[i, p] = acc
        return out

    @njit(cache=True, parallel=True)
    def nb_hamilton(a, b):
        n = a.shape[0]
        out = np.empty((n, 4))
        for i in prange(n):
            aw, ax, ay, az = a[i, 0], a[i, 1], a[i, 2], a[i, 3]
            bw, bx, by, bz = b[i, 0], b[i, 1], b[i, 2], b[i, 3]
            out[i, 0] = aw * bw - ax * bx - ay * by - az * bz
            out[i, 1] = aw * bx + ax * bw + ay * bz - az * by
            out[i, 2] = aw * by - ax * bz + ay * bw + az * bx
            out[i, 3] = aw * bz + ax * by - ay * bx + az * bw
        return out

    return {
        "eval_poly": nb_eval_poly,
        "eval_poly_packed": nb_eval_poly_packed,
        "hamilton": nb_hamilton,
    }


def _select_backend():
    if _REQUESTED == "numpy":
        return "numpy", _NUMPY_IMPLS
    try:
        impls = _build_numba_impls()
        return "numba", impls
    except ImportError:
        if _REQUESTED == "numba":
            raise RuntimeError("XI_S3_BACKEND=numba but numba is not importable")
        return "numpy", _NUMPY_IMPLS


_BACKEND_NAME, _IMPLS = _select_backend()

eval_poly = _IMPLS["eval_poly"]
eval_poly_packed = _IMPLS["eval_poly_packed"]
hamilton = _IMPLS["hamilton"]


def backend() -> str:
    """Name of the active kernel backend ("numba" or "numpy")."""
    return _BACKEND_NAME


def implementations(name: str) -> dict:
    """Fetch a specific backend's kernels (for benchmarks and tests)."""
    if name == "numpy":
        return dict(_NUMPY_IMPLS)
    if name == "numba":
        return _build_numba_impls()
    raise ValueError(f"unknown backend {name!r}")


def pack_polys(polys) -> tuple:
    """Pack MultiPoly objects into (exps, coefs, offsets) kernel arrays."""
    exps_list, coefs_list, offsets = [], [], [0]
    for p in polys:
        e, c = p.to_arrays()
        exps_list.append(e)
        coefs_list.append(c)
        offsets.append(offsets[-1] + len(c))
    return (np.concatenate(exps_list, axis=0),
            np.concatenate(coefs_list),
            np.array(offsets, dtype=np.int64))
