import math
import random

import pytest
from hypothesis import given, strategies as st

from xi_s3.rational import Q
from xi_s3.poly import (
    BLOCK_X4,
    DegreeCapError,
    MultiPoly,
    euclidean_laplacian,
    get_degree_cap,
    homogeneous_component,
    homogeneous_components,
    integrate_product_over_block,
    is_homogeneous,
    monomial_sphere_integral,
    monomials,
    reduce_on_sphere,
    set_degree_cap,
    sphere_inner,
    sphere_integral,
    substitute_linear,
)
from xi_s3.quaternion import random_rational_unit
from xi_s3.harmonics import rotate


def x(i, n=4):
    return MultiPoly.variable(n, i)


def r2(n=4):
    return sum((x(i, n) ** 2 for i in range(4)), MultiPoly.zero(n))


def random_poly(rng, nvars=4, max_deg=3, terms=6):
    t = {}
    for _ in range(terms):
        exp = [0] * nvars
        for _ in range(rng.randint(0, max_deg)):
            exp[rng.randrange(nvars)] += 1
        t[tuple(exp)] = Q(rng.randint(-9, 9), rng.randint(1, 9))
    return MultiPoly(nvars, t)


small_polys = st.builds(
    lambda pairs: MultiPoly(4, {tuple(e): Q(c, d) for e, c, d in pairs}),
    st.lists(
        st.tuples(
            st.tuples(*([st.integers(0, 2)] * 4)),
            st.integers(-9, 9),
            st.integers(1, 9),
        ),
        max_size=5,
    ),
)


class TestRingStructure:
    @given(small_polys, small_polys, small_polys)
    def test_distributivity(self, a, b, c):
        assert (a + b) * c == a * c + b * c

    @given(small_polys, small_polys)
    def test_commutativity(self, a, b):
        assert a * b == b * a

    @given(small_polys, small_polys, small_polys)
    def test_associativity(self, a, b, c):
        assert (a * b) * c == a * (b * c)

    def test_no_stored_zero_coefficients(self):
        p = x(0) - x(0) + x(1)
        assert (0, 0, 0, 0) not in p.terms
        assert (1, 0, 0, 0) not in p.terms
        assert len(p.terms) == 1

    def test_power(self):
        assert x(0) ** 3 == x(0) * x(0) * x(0)
        assert (x(0) + 1) ** 2 == x(0) ** 2 + x(0).scale(2) + 1


class TestLaplacian:
    def test_laplacian_of_radius_squared(self):
        assert euclidean_laplacian(r2(), BLOCK_X4) == MultiPoly.constant(4, 8)

    def test_harmonic_monomial(self):
        assert euclidean_laplacian(x(0) * x(1), BLOCK_X4).is_zero()

    def test_fourth_power(self):
        # d^2/dv^2 of v^4 is 12 v^2, term by term
        assert euclidean_laplacian(x(0) ** 4, BLOCK_X4) == (x(0) ** 2).scale(12)

    def test_unknown_block_rejected(self):
        with pytest.raises(ValueError):
            euclidean_laplacian(x(0), (0, 1, 2, 9))


class TestHomogeneousComponents:
    def test_simple_pick(self):
        p = 1 + x(0) + x(0) ** 2
        assert homogeneous_component(p, 1) == x(0)

    def test_homogeneous_fixed_point(self):
        p = x(0) ** 2 * x(1)
        assert homogeneous_component(p, 3) == p
        assert is_homogeneous(p, 3)

    def test_components_sum_back_50_random(self, rng):
        for _ in range(50):
            p = random_poly(rng, max_deg=4)
            total = MultiPoly.zero(4)
            for comp in homogeneous_components(p).values():
                total = total + comp
            assert total == p


class TestSubstitution:
    def test_identity_map(self, rng):
        p = random_poly(rng)
        images = {i: MultiPoly.variable(4, i) for i in range(4)}
        assert substitute_linear(p, images, 4) == p

    def test_variable_relabel(self):
        # first coordinate of v*g at g = identity is just v_1
        images = {i: MultiPoly.variable(4, i) for i in range(4)}
        assert substitute_linear(x(0), images, 4) == x(0)

    def test_group_product_at_identity_element(self):
        # (x*g)_1 with g fixed to the identity quaternion collapses to x_1
        from xi_s3.operators import _xg_power
        u1 = _xg_power((1, 0, 0, 0))
        e = [Q(1), Q(0), Q(0), Q(0)]
        vals = []
        for i in range(4):
            xpt = [Q(0)] * 4
            xpt[i] = Q(1)
            vals.append(u1.evaluate(xpt + e + [Q(0)] * 4))
        assert vals == [Q(1), Q(0), Q(0), Q(0)]

    def test_bilinear_substitution_matches_quaternion_products(self, rng):
        # f(u, v) = sum_a u_a v_a composed with u = x*g, v = g*y must
        # evaluate like the quaternion expression at exact sample points
        from xi_s3.operators import _xg_power, _gy_power
        f_composed = MultiPoly.zero(12)
        for a in range(4):
            alpha = tuple(1 if i == a else 0 for i in range(4))
            f_composed = f_composed + _xg_power(alpha) * _gy_power(alpha)
        for _ in range(100):
            xs, gs, ys = (random_rational_unit(rng) for _ in range(3))
            point = list(xs) + list(gs) + list(ys)
            expected = (xs * gs).dot(gs * ys)
            assert f_composed.evaluate(point) == expected

    def test_missing_image_rejected(self):
        with pytest.raises(ValueError):
            substitute_linear(x(0), {0: MultiPoly.variable(4, 0)}, 4)


class TestMonomialSphereIntegral:
    def test_constant(self):
        assert monomial_sphere_integral((0, 0, 0, 0)) == 1

    def test_quadratic_by_symmetry(self):
        # the four squares sum to 1 on the sphere and have equal integrals
        assert monomial_sphere_integral((2, 0, 0, 0)) == Q(1, 4)

    def test_odd_vanishes(self):
        assert monomial_sphere_integral((1, 0, 0, 0)) == 0
        assert monomial_sphere_integral((2, 1, 0, 2)) == 0

    def test_quartics_against_monte_carlo(self):
        # oracle: Haar Monte Carlo within 5 standard errors
        from xi_s3.quadrature import mc_integrate_poly
        for exp, label in [((4, 0, 0, 0), "v1^4"), ((2, 2, 0, 0), "v1^2 v2^2")]:
            p = MultiPoly.monomial(4, exp)
            est, se = mc_integrate_poly(p, 1_000_000, seed=hash(exp) % 2**31)
            exact = float(monomial_sphere_integral(exp))
            assert abs(est - exact) < 5 * se, label
        assert monomial_sphere_integral((4, 0, 0, 0)) == Q(1, 8)
        assert monomial_sphere_integral((2, 2, 0, 0)) == Q(1, 24)

    def test_even_monomials_against_gamma_formula(self):
        # independent closed form: Gamma(2) prod Gamma((a_i+1)/2)
        #                          / (pi^2 Gamma((4+|a|)/2))
        for d in range(0, 10, 2):
            for exp in monomials(4, d):
                if any(e % 2 for e in exp):
                    continue
                g = math.prod(math.gamma((e + 1) / 2) for e in exp)
                val = math.gamma(2) * g / (math.pi ** 2 * math.gamma((4 + d) / 2))
                assert abs(float(monomial_sphere_integral(exp)) - val) < 1e-15


class TestSphereIntegral:
    def test_probability_measure(self):
        assert sphere_integral(MultiPoly.constant(4, 1), BLOCK_X4).constant_value() == 1

    def test_linearity(self, rng):
        a, b = random_poly(rng), random_poly(rng)
        lhs = sphere_integral(a + b.scale(Q(3, 7)), BLOCK_X4)
        rhs = sphere_integral(a, BLOCK_X4) + sphere_integral(b, BLOCK_X4).scale(Q(3, 7))
        assert lhs == rhs

    def test_rotation_invariance_exact(self, rng):
        for _ in range(10):
            g, h = random_rational_unit(rng), random_rational_unit(rng)
            p = random_poly(rng, max_deg=4)
            assert sphere_integral(rotate(p, g, h), BLOCK_X4) == \
                sphere_integral(p, BLOCK_X4)

    def test_measure_lives_on_the_sphere(self, rng):
        # multiplying by the block's radius squared must not change integrals
        for _ in range(10):
            p = random_poly(rng)
            assert sphere_integral(r2() * p, BLOCK_X4) == sphere_integral(p, BLOCK_X4)

    def test_partial_integration_leaves_other_variables(self):
        p8 = MultiPoly.monomial(8, (2, 0, 0, 0, 1, 0, 0, 0))
        out = sphere_integral(p8, (0, 1, 2, 3))
        assert out.nvars == 4
        assert out == MultiPoly.variable(4, 0).scale(Q(1, 4))


class TestIntegrateProductOverBlock:
    @given(small_polys, small_polys)
    def test_matches_direct_product_integral(self, a, b):
        lhs = integrate_product_over_block(a, b, BLOCK_X4)
        rhs = sphere_integral(a * b, BLOCK_X4)
        assert lhs == rhs

    def test_twelve_variable_block(self, rng):
        a = random_poly(rng, nvars=12, max_deg=2)
        b = random_poly(rng, nvars=12, max_deg=2)
        g_block = (4, 5, 6, 7)
        assert integrate_product_over_block(a, b, g_block) == \
            sphere_integral(a * b, g_block)

    def test_sphere_inner_consistency(self, rng):
        a, b = random_poly(rng), random_poly(rng)
        assert sphere_inner(a, b) == sphere_integral(a * b, BLOCK_X4).constant_value()


class TestReduceOnSphere:
    def test_radius_squared_reduces_to_one(self):
        assert reduce_on_sphere(r2(), BLOCK_X4) == MultiPoly.constant(4, 1)

    def test_agrees_pointwise_on_sphere(self, rng):
        for _ in range(20):
            p = random_poly(rng, max_deg=5)
            q = reduce_on_sphere(p, BLOCK_X4)
            pt = list(random_rational_unit(rng))
            assert p.evaluate(pt) == q.evaluate(pt)

    def test_canonical_form_has_low_last_exponent(self, rng):
        p = random_poly(rng, max_deg=6)
        q = reduce_on_sphere(p, BLOCK_X4)
        assert all(e[3] < 2 for e in q.terms)

    def test_idempotent(self, rng):
        p = random_poly(rng, max_deg=5)
        q = reduce_on_sphere(p, BLOCK_X4)
        assert reduce_on_sphere(q, BLOCK_X4) == q


class TestDegreeCap:
    def test_multiplication_cap(self):
        old = get_degree_cap()
        try:
            set_degree_cap(5)
            with pytest.raises(DegreeCapError):
                _ = (x(0) ** 3) * (x(1) ** 3)
        finally:
            set_degree_cap(old)

    def test_default_cap_allows_operator_workloads(self):
        assert get_degree_cap() >= 24


class TestSerializationAndOrder:
    def test_json_roundtrip(self, rng):
        p = random_poly(rng, max_deg=4)
        assert MultiPoly.from_json(p.to_json()) == p

    def test_graded_lex_order_frozen(self):
        assert monomials(2, 2) == [(2, 0), (1, 1), (0, 2)]
        assert monomials(4, 1) == [(1, 0, 0, 0), (0, 1, 0, 0),
                                   (0, 0, 1, 0), (0, 0, 0, 1)]

    def test_evaluate_exact(self):
        p = x(0) ** 2 + x(1).scale(Q(1, 3))
        assert p.evaluate([Q(1, 2), Q(3), Q(0), Q(0)]) == Q(1, 4) + 1
