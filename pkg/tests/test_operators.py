import math
import os
import random

import numpy as np
import pytest

from xi_s3.rational import Q
from xi_s3 import kernels
from xi_s3.poly import DegreeCapError, MultiPoly, sphere_integral
from xi_s3.harmonics import X8, Y8, harmonic_basis, laplace_beltrami
from xi_s3.product import (
    SpectralCoeffs,
    analyze,
    bipoly,
    inner,
    random_coeffs,
    reduce_biblock,
    sobolev_norm_sq,
    synthesize,
)
from xi_s3.operators import (
    NotInKernelError,
    annihilation_check,
    box_apply,
    box_multiplier,
    contraction_and_smoothing_check,
    exactness_report,
    extract_reflection,
    float_matrix_T,
    kernel_invariance_check,
    multiplier_witness,
    solve_box,
    xi_on_product,
    xi_spectral,
    xi_symbolic,
    xi_zonal_kernel,
)
from xi_s3.quaternion import ONE, haar_array, haar_sample


def x(i):
    return MultiPoly.variable(4, i)


def trace_pair():
    return sum((bipoly(x(a), x(a)) for a in range(4)), MultiPoly.zero(8))


def random_bipoly(rng, bdeg=3, terms=6):
    t = {}
    for _ in range(terms):
        exp = [0] * 8
        for _ in range(rng.randint(0, bdeg)):
            exp[rng.randrange(4)] += 1
        for _ in range(rng.randint(0, bdeg)):
            exp[4 + rng.randrange(4)] += 1
        t[tuple(exp)] = Q(rng.randint(-9, 9), rng.randint(1, 9))
    return MultiPoly(8, t)


def inner8(a, b):
    """Exact L2 pairing of 8-variable polynomials over the product sphere."""
    from xi_s3.poly import integrate_product_over_block
    fy = integrate_product_over_block(a, b, X8)
    return sphere_integral(fy, (0, 1, 2, 3)).constant_value()


class TestXiSymbolic:
    def test_fixes_constants(self):
        assert xi_symbolic(MultiPoly.constant(8, 1)) == MultiPoly.constant(8, 1)

    def test_kills_mismatched_blocks(self):
        assert xi_symbolic(bipoly(x(0), MultiPoly.constant(4, 1))).is_zero()

    def test_trace_pair_maps_to_w_product(self):
        assert xi_symbolic(trace_pair()) == bipoly(x(0), x(0))

    def test_iterate_gives_quarter(self):
        f = trace_pair()
        assert xi_symbolic(xi_symbolic(f)) == f.scale(Q(1, 4))

    def test_against_monte_carlo_group_average(self):
        # oracle: average f(xg, gy) over a million Haar samples of g at
        # twenty fixed (x, y) pairs, within five standard errors
        f = trace_pair()
        tf = xi_symbolic(f)
        xs = haar_array(31, 20)
        ys = haar_array(32, 20)
        n = 1_000_000
        g = haar_array(33, n)
        t_exps, t_coefs = tf.to_arrays()
        f_exps, f_coefs = f.to_arrays()
        for xi_row, yi_row in zip(xs, ys):
            xg = kernels.hamilton(np.broadcast_to(xi_row, (n, 4)).copy(), g)
            gy = kernels.hamilton(g, np.broadcast_to(yi_row, (n, 4)).copy())
            vals = kernels.eval_poly(
                np.ascontiguousarray(np.hstack([xg, gy])), f_exps, f_coefs)
            est = vals.mean()
            se = vals.std(ddof=1) / math.sqrt(n)
            expected = kernels.eval_poly(
                np.concatenate([xi_row, yi_row])[None, :], t_exps, t_coefs)[0]
            assert abs(est - expected) < 5 * se + 1e-12

    def test_degree_cap_guard(self):
        with pytest.raises(DegreeCapError):
            xi_symbolic(bipoly(x(0) ** 7, x(1) ** 7))

    def test_requires_eight_variables(self):
        with pytest.raises(ValueError):
            xi_symbolic(MultiPoly.constant(4, 1))


class TestAnnihilation:
    def test_basis_pairs_up_to_two(self):
        rep = annihilation_check(2)
        assert rep["ok"]
        assert rep["pairs_checked"] == sum(
            (k + 1) ** 2 * (l + 1) ** 2
            for k in range(3) for l in range(3) if k != l)

    def test_float_shadow(self):
        from xi_s3.operators import float_cross_block_norm
        assert float_cross_block_norm(0, 2) < 1e-12
        assert float_cross_block_norm(2, 1) < 1e-12


class TestReflectionExtraction:
    def test_degree_zero(self):
        rep = extract_reflection(0)
        assert rep.matrix_T == ((Q(1),),)
        assert rep.lam == 1
        assert rep.matrix_R() == ((Q(1),),)

    def test_degree_one_matrix(self):
        rep = extract_reflection(1)
        assert rep.dim == 4
        assert len(rep.matrix_T) == 16
        assert rep.t_square_ok and rep.involution_ok and rep.self_adjoint_ok
        assert rep.lam == Q(1, 2)
        # multiplicities are reported, not asserted: they must only fill the space
        assert rep.eig_plus + rep.eig_minus == 16

    def test_degree_two_involution(self):
        rep = extract_reflection(2)
        assert rep.t_square_ok and rep.involution_ok and rep.self_adjoint_ok
        assert rep.eig_plus + rep.eig_minus == 81

    def test_exact_cap_enforced(self):
        with pytest.raises(ValueError):
            extract_reflection(4, "exact")

    def test_float_matches_exact(self):
        for k in (0, 1, 2):
            me = extract_reflection(k, "exact").matrix_float()
            mf = extract_reflection(k, "float").matrix_T
            assert np.max(np.abs(me - mf)) < 1e-9

    def test_float_verdicts(self):
        rep = extract_reflection(2, "float")
        assert rep.t_square_ok and rep.involution_ok and rep.self_adjoint_ok
        assert rep.eig_plus + rep.eig_minus == 81

    def test_float_verdicts_beyond_exact_cap(self):
        rep = extract_reflection(4, "float")
        assert rep.t_square_ok and rep.involution_ok and rep.self_adjoint_ok
        assert rep.eig_plus + rep.eig_minus == 625
        assert abs(rep.reflection_norm - 1.0) < 1e-9

    def test_reflection_norm_is_one(self):
        for k in (0, 1, 2):
            assert abs(extract_reflection(k).reflection_norm - 1.0) < 1e-10

    def test_matrix_squared_is_scaled_identity(self):
        rep = extract_reflection(1)
        n = 16
        m = rep.matrix_T
        for r in range(n):
            for c in range(n):
                acc = sum((m[r][t] * m[t][c] for t in range(n)), Q(0))
                assert acc == (Q(1, 4) if r == c else 0)

    def test_json_export(self):
        d = extract_reflection(1).to_json()
        assert d["lambda"] == [1, 2]
        assert d["verdicts"]["involution"]


class TestXiSpectral:
    def test_kills_off_diagonal_block(self):
        c = random_coeffs(2, seed=1, off_diagonal_only=True)
        assert xi_spectral(c).is_zero()

    def test_constant_block_unchanged(self):
        c = SpectralCoeffs(0, "exact", {(0, 0): [[Q(5, 3)]]})
        assert xi_spectral(c) == c

    def test_agrees_with_symbolic_on_25_random_inputs(self, rng):
        for _ in range(25):
            f = random_bipoly(rng)
            lhs = analyze(xi_symbolic(f), 3)
            rhs = xi_spectral(analyze(f, 3))
            assert lhs == rhs

    def test_float_mode(self):
        c = random_coeffs(2, seed=2, diagonal_only=True)
        exact = xi_spectral(c).to_float()
        flt = xi_spectral(c.to_float())
        for kl in exact.blocks:
            assert np.allclose(exact.block(*kl), flt.block(*kl), atol=1e-9)

    def test_exact_mode_needs_exact_matrices(self):
        c = SpectralCoeffs(4, "exact", {(4, 4): [[Q(1)] * 25 for _ in range(25)]})
        with pytest.raises(ValueError, match="float mode"):
            xi_spectral(c)


class TestXiZonalKernel:
    def test_constant(self):
        pts = list(zip(haar_sample(1, 5), haar_sample(2, 5)))
        vals = xi_zonal_kernel(MultiPoly.constant(8, 1), pts)
        assert np.max(np.abs(vals - 1.0)) < 1e-12

    def test_trace_pair_at_identity(self):
        e = ONE.to_float()
        vals = xi_zonal_kernel(trace_pair(), [(e, e)])
        assert abs(vals[0] - 1.0) < 1e-12

    def test_degree_two_matches_symbolic(self, rng):
        basis = harmonic_basis(2)
        f = MultiPoly.zero(8)
        for _ in range(5):
            i, j = rng.randrange(9), rng.randrange(9)
            f = f + bipoly(basis.elements[i], basis.elements[j]).scale(
                Q(rng.randint(-5, 5), rng.randint(1, 5)))
        tf = xi_symbolic(f)
        pts = list(zip(haar_sample(5, 20), haar_sample(6, 20)))
        kv = xi_zonal_kernel(f, pts)
        exps, coefs = tf.to_arrays()
        arr = np.array([np.concatenate([a.to_array(), b.to_array()])
                        for a, b in pts])
        sv = kernels.eval_poly(arr, exps, coefs)
        assert np.max(np.abs(kv - sv)) < 1e-8

    def test_rejects_multi_block_input(self):
        f = trace_pair() + MultiPoly.constant(8, 1)
        with pytest.raises(ValueError):
            xi_zonal_kernel(f, [(ONE.to_float(), ONE.to_float())])

    def test_rejects_low_order_rule(self):
        f = bipoly(harmonic_basis(2).elements[0], harmonic_basis(2).elements[0])
        with pytest.raises(ValueError):
            xi_zonal_kernel(f, [(ONE.to_float(), ONE.to_float())], order=1)


class TestBoxOperator:
    def test_kills_diagonal(self):
        c = random_coeffs(2, seed=3, diagonal_only=True)
        assert box_apply(c).is_zero()

    def test_scales_block_01_by_three(self):
        c = SpectralCoeffs(1, "exact", {(0, 1): [[Q(1), Q(0), Q(2), Q(0)]]})
        out = box_apply(c)
        assert out.blocks[(0, 1)][0][0] == 3
        assert out.blocks[(0, 1)][0][2] == 6

    def test_matches_symbolic_sphere_laplacians(self):
        # independent route: blockwise symbolic sphere Laplacians
        f = bipoly(x(0), x(0) * x(1))
        box_f = laplace_beltrami(f, X8) - laplace_beltrami(f, Y8)
        assert analyze(reduce_biblock(box_f), 2) == box_apply(analyze(f, 2))

    def test_multiplier_table(self):
        assert box_multiplier(0, 1) == 3
        assert box_multiplier(1, 0) == -3
        assert all(box_multiplier(k, k) == 0 for k in range(7))


class TestSolveBox:
    def test_zero(self):
        assert solve_box(SpectralCoeffs.zeros(2)).is_zero()

    def test_forced_multiplier(self):
        c = SpectralCoeffs(1, "exact", {(0, 1): [[Q(1), Q(0), Q(0), Q(0)]]})
        u = solve_box(c)
        assert u.blocks[(0, 1)][0][0] == Q(1, 3)

    def test_roundtrip_random_n4(self):
        for seed in range(10):
            c = random_coeffs(4, seed=100 + seed, off_diagonal_only=True)
            assert box_apply(solve_box(c)) == c

    def test_diagonal_input_rejected_with_block_named(self):
        c = SpectralCoeffs(2, "exact", {(1, 1): [[Q(1)] * 4 for _ in range(4)]})
        with pytest.raises(NotInKernelError, match=r"\(1,1\)"):
            solve_box(c)

    def test_solution_is_canonical(self):
        c = random_coeffs(3, seed=42, off_diagonal_only=True)
        u = solve_box(c)
        assert all(k != l for (k, l) in u.blocks)


class TestExactCouple:
    def test_trivial_truncation(self):
        rep = exactness_report(0)
        assert rep["ok"]

    def test_degree_two_exact(self):
        rep = exactness_report(2)
        assert rep["ok"]
        assert all(rep["checks"][key] for key in (
            "kernel_T_contains_offdiag", "T_injective_on_diag",
            "image_T_covers_diag", "kernel_box_is_diag",
            "image_box_covers_offdiag"))

    def test_degree_three_float_shadow(self):
        rep = exactness_report(3, mode="float")
        assert rep["ok"]
        assert rep["checks"]["offdiag_max_entry"] < 1e-9
        assert rep["checks"]["image_T_max_err"] < 1e-9
        assert rep["checks"]["image_box_max_err"] < 1e-9

    def test_compositions_vanish(self):
        c = random_coeffs(3, seed=11)
        assert box_apply(xi_spectral(c)).is_zero()
        assert xi_spectral(box_apply(c)).is_zero()


class TestOperatorInvariants:
    def test_self_adjointness_on_random_polynomials(self, rng):
        for _ in range(5):
            f, h = random_bipoly(rng), random_bipoly(rng)
            lhs = inner8(reduce_biblock(xi_symbolic(f)), reduce_biblock(h))
            rhs = inner8(reduce_biblock(f), reduce_biblock(xi_symbolic(h)))
            assert lhs == rhs

    def test_kills_every_mixed_block_through_degree_four(self, rng):
        # the dense sweep stops at 3; sample the degree-4 families exactly
        b4 = harmonic_basis(4)
        for l in range(4):
            bl = harmonic_basis(l)
            for _ in range(8):
                i, j = rng.randrange(b4.dim), rng.randrange(bl.dim)
                assert xi_on_product(b4.elements[i], bl.elements[j]).is_zero()
                assert xi_on_product(bl.elements[j], b4.elements[i]).is_zero()

    def test_scaled_square_is_identity(self):
        for k in (0, 1, 2):
            rep = extract_reflection(k)
            n = rep.dim ** 2
            m = rep.matrix_T
            scale = Q((k + 1) ** 2)
            for r in range(n):
                row = [sum((m[r][t] * m[t][c] for t in range(n)), Q(0)) * scale
                       for c in range(n)]
                expected = [Q(1) if c == r else Q(0) for c in range(n)]
                assert row == expected

    def test_gram_weighted_pairing_self_adjoint_spectral(self):
        c = random_coeffs(2, seed=21)
        d = random_coeffs(2, seed=22)
        assert inner(xi_spectral(c), d) == inner(c, xi_spectral(d))


class TestKernelInvariance:
    def test_degree_zero_constant(self):
        rep = kernel_invariance_check(0, samples=2)
        assert rep["ok"]

    def test_degree_one(self):
        rep = kernel_invariance_check(1, samples=5)
        assert rep["ok"]
        assert rep["max_rel_err"] < 1e-6

    def test_identity_group_element_is_trivial(self):
        # with g = identity both sides are syntactically equal
        from xi_s3.operators import _t_square_kernel
        from xi_s3.quadrature import rule_for_degree
        rule = rule_for_degree(4)
        pts = haar_array(71, 4)
        base = _t_square_kernel(1, rule, *pts)
        again = _t_square_kernel(1, rule, *pts)
        assert base == again

    def test_cost_guard(self):
        with pytest.raises(ValueError):
            kernel_invariance_check(3)


class TestMultiplierWitness:
    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_lambda_from_kernel_diagonal(self, k):
        rep = multiplier_witness(k)
        assert rep["ok"]
        assert abs(rep["lambda_estimate"] - 1.0 / (k + 1)) < 1e-8


class TestContractionSmoothing:
    def test_block_zero_is_isometric(self):
        c = SpectralCoeffs(0, "exact", {(0, 0): [[Q(7, 2)]]})
        assert sobolev_norm_sq(xi_spectral(c), 0) == sobolev_norm_sq(c, 0)

    def test_off_diagonal_contracts_to_zero(self):
        c = random_coeffs(2, seed=31, off_diagonal_only=True)
        assert sobolev_norm_sq(xi_spectral(c), 0) == 0

    def test_random_trials_and_norm_estimate(self):
        rep = contraction_and_smoothing_check(4, trials=30, seed=5)
        assert rep["ok"]
        assert rep["operator_norm_estimate"] <= rep["analytic_bound"]
        # the estimate approaches but never exceeds sqrt(2)
        assert rep["operator_norm_estimate"] > 1.3

    def test_per_degree_factors_increase(self):
        rep = contraction_and_smoothing_check(5, trials=4, seed=6)
        factors = [rep["per_degree"][k]["smoothing_factor"] for k in range(6)]
        assert all(a <= b + 1e-12 for a, b in zip(factors, factors[1:]))


class TestParallelExtraction:
    def test_threaded_columns_match_sequential(self):
        if not hasattr(os, "fork"):
            pytest.skip("no fork")
        from xi_s3 import operators as ops
        sequential = extract_reflection(1).matrix_T
        saved = dict(ops._REFLECTION_CACHE)
        try:
            ops._REFLECTION_CACHE.clear()
            os.environ["XI_S3_THREADS"] = "2"
            threaded = extract_reflection(1).matrix_T
            assert threaded == sequential
        finally:
            os.environ.pop("XI_S3_THREADS", None)
            ops._REFLECTION_CACHE.clear()
            ops._REFLECTION_CACHE.update(saved)
