"""Floating-point integration on S3.

Two independent numerical routes to the uniform probability measure:

* ``product_rule``: a deterministic product quadrature in hyperspherical
  coordinates whose polynomial exactness degree is certified empirically
  at build time against the exact monomial integrals, and
* ``mc_integrate``: seeded Haar Monte Carlo with a standard error, used
  as the independent oracle throughout the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .poly import MultiPoly, monomial_sphere_integral, monomials

_CERTIFY_TOL = 1e-10


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes on S3 with positive weights summing to one.

    ``exact_degree`` is the certified total degree through which every
    monomial integrates to its exact value within 1e-10.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    exact_degree: int

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, f) -> float:
        """Integrate a vectorized function mapping (n, 4) -> (n,)."""
        return float(self.weights @ np.asarray(f(self.nodes)))

    def integrate_values(self, values: np.ndarray) -> float:
        return float(self.weights @ values)

    def integrate_poly(self, p: MultiPoly) -> float:
        exps, coefs = p.to_arrays()
        return self.integrate_values(kernels.eval_poly(self.nodes, exps, coefs))

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "exact_degree": self.exact_degree,
            "nodes": self.nodes.tolist(),
            "weights": self.weights.tolist(),
        }


def _build_nodes(order: int):
    m = order
    # psi in [0, pi] carrying sin^2 weight: Gauss-Chebyshev second kind
    i = np.arange(1, m + 1)
    ang = i * np.pi / (m + 1)
    t_psi = np.cos(ang)                      # cos(psi)
    w_psi = (np.pi / (m + 1)) * np.sin(ang) ** 2
    # theta in [0, pi] carrying sin weight: Gauss-Legendre in cos(theta)
    u_theta, w_theta = np.polynomial.legendre.leggauss(m)
    # phi uniform on [0, 2pi)
    phi = 2.0 * np.pi * np.arange(2 * m) / (2 * m)
    w_phi = np.full(2 * m, np.pi / m)

    tp, ut, ph = np.meshgrid(t_psi, u_theta, phi, indexing="ij")
    wp, wt, wf = np.meshgrid(w_psi, w_theta, w_phi, indexing="ij")
    sin_psi = np.sqrt(1.0 - tp ** 2)
    sin_theta = np.sqrt(1.0 - ut ** 2)
    nodes = np.stack(
        [
            tp,
            sin_psi * ut,
            sin_psi * sin_theta * np.cos(ph),
            sin_psi * sin_theta * np.sin(ph),
        ],
        axis=-1,
    ).reshape(-1, 4)
    weights = (wp * wt * wf).reshape(-1) / (2.0 * np.pi ** 2)
    return np.ascontiguousarray(nodes), np.ascontiguousarray(weights)


def _certify(nodes: np.ndarray, weights: np.ndarray, max_degree: int) -> int:
    """Largest d such that all monomials of total degree <= d integrate
    to their exact values within the certification tolerance."""
    certified = -1
    for d in range(max_degree + 1):
        exps = monomials(4, d)
        packed_e = np.array(exps, dtype=np.int64)
        packed_c = np.ones(len(exps))
        offsets = np.arange(len(exps) + 1, dtype=np.int64)
        vals = kernels.eval_poly_packed(nodes, packed_e, packed_c, offsets)
        approx = weights @ vals
        exact = np.array([float(monomial_sphere_integral(e)) for e in exps])
        if np.max(np.abs(approx - exact)) > _CERTIFY_TOL:
            break
        certified = d
    return certified


_RULE_CACHE: dict = {}


def product_rule(order: int) -> QuadratureRule:
    """Product quadrature on S3 with 2 * order^3 nodes.

    Hyperspherical coordinates (cos psi, sin psi cos theta,
    sin psi sin theta cos phi, sin psi sin theta sin phi) with density
    proportional to sin^2(psi) sin(theta); Gauss-Chebyshev second kind in
    psi, Gauss-Legendre in cos(theta), uniform in phi. The exactness
    degree grows linearly with order and is certified, not assumed.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    rule = _RULE_CACHE.get(order)
    if rule is None:
        nodes, weights = _build_nodes(order)
        exact_degree = _certify(nodes, weights, 2 * order + 1)
        rule = QuadratureRule(order, nodes, weights, exact_degree)
        _RULE_CACHE[order] = rule
    return rule


def rule_for_degree(degree: int) -> QuadratureRule:
    """Smallest cached product rule certified through the given degree."""
    order = max(1, (degree + 1) // 2)
    while True:
        rule = product_rule(order)
        if rule.exact_degree >= degree:
            return rule
        order += 1


def haar_points(n: int, rng) -> np.ndarray:
    """(n, 4) Haar-uniform points from an existing numpy Generator."""
    v = rng.normal(size=(n, 4))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


def mc_integrate(f, n: int, seed: int, chunk: int = 1 << 20):
    """Haar Monte Carlo estimate of the mean of f over S3.

    f maps an (m, 4) array of unit quaternions to (m,) values. Returns
    (estimate, standard_error); deterministic for a given seed.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    s1 = 0.0
    s2 = 0.0
    remaining = n
    while remaining > 0:
        m = min(chunk, remaining)
        vals = np.asarray(f(haar_points(m, rng)), dtype=np.float64)
        s1 += float(vals.sum())
        s2 += float((vals * vals).sum())
        remaining -= m
    mean = s1 / n
    var = max(s2 - n * mean * mean, 0.0) / (n - 1)
    return mean, math.sqrt(var / n)


def mc_integrate_poly(p: MultiPoly, n: int, seed: int):
    exps, coefs = p.to_arrays()
    return mc_integrate(lambda pts: kernels.eval_poly(pts, exps, coefs), n, seed)
