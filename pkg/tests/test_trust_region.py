"""Boundary-step solver tests.

Linear and quadratic models have closed-form sphere minima, which pins the
multiplier and the step exactly; cubic instances are checked against dense
sampling and second-order certificates.
"""

import json
import math

import numpy as np
import pytest

from specteig import (BoundaryConfig, ConfigError, DimError, DomainError,
                      TaylorPoly, check_second_order, homogenize,
                      lagrangian_grad, load_poly, poly_to_dict, random_cubic,
                      solve_boundary)
from specteig.errors import ParseError

from conftest import fd_gradient


def cubic_blocks(n, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(n)
    h = rng.standard_normal((n, n))
    h = 0.5 * (h + h.T)
    t = rng.standard_normal((n, n, n))
    t = sum(np.transpose(t, perm) for perm in
            ((0, 1, 2), (0, 2, 1), (1, 0, 2),
             (1, 2, 0), (2, 0, 1), (2, 1, 0))) / 6.0
    return g, h, t


class TestTaylorPoly:
    def test_evaluate_simple(self):
        p = TaylorPoly(2, 2, {(0, 0): 2.0, (1, 0): 3.0, (1, 1): 1.0})
        assert p.evaluate(np.array([1.0, 2.0])) == pytest.approx(7.0)
        assert p.evaluate(np.zeros(2)) == pytest.approx(2.0)

    def test_evaluate_many_matches_loop(self):
        p = random_cubic(3, 17)
        rng = np.random.default_rng(0)
        mat = rng.standard_normal((20, 3))
        many = p.evaluate_many(mat)
        for row, val in zip(mat, many):
            assert val == pytest.approx(p.evaluate(row), rel=1e-12)

    def test_gradient_hessian_match_finite_differences(self):
        p = random_cubic(4, 23, scales=(1.0, 1.0, 1.0))
        rng = np.random.default_rng(1)
        for _ in range(5):
            s = rng.standard_normal(4)
            g = p.gradient(s)
            fd = fd_gradient(p.evaluate, s)
            assert np.linalg.norm(g - fd) <= 1e-6 * max(
                1.0, np.linalg.norm(g))
            h = p.hessian(s)
            fd_h = np.stack([fd_gradient(
                lambda v, i=i: p.gradient(v)[i], s) for i in range(4)])
            assert np.linalg.norm(h - fd_h) <= 1e-5 * max(
                1.0, np.linalg.norm(h))

    def test_from_cubic_is_exact(self):
        g, h, t = cubic_blocks(3, 11)
        p = TaylorPoly.from_cubic(1.5, g, h, t)
        rng = np.random.default_rng(2)
        for _ in range(10):
            s = rng.standard_normal(3)
            expect = (1.5 + float(g @ s) + 0.5 * float(s @ h @ s)
                      + float(np.einsum("ijk,i,j,k->", t, s, s, s)) / 6.0)
            assert p.evaluate(s) == pytest.approx(expect, rel=1e-10,
                                                  abs=1e-12)
            grad = (g + h @ s
                    + 0.5 * np.einsum("ijk,j,k->i", t, s, s))
            assert np.allclose(p.gradient(s), grad, rtol=1e-10, atol=1e-12)

    def test_from_cubic_symmetrizes(self):
        g = np.zeros(2)
        h_asym = np.array([[1.0, 4.0], [0.0, 2.0]])
        h_sym = 0.5 * (h_asym + h_asym.T)
        t = np.zeros((2, 2, 2))
        pa = TaylorPoly.from_cubic(0.0, g, h_asym, t)
        ps = TaylorPoly.from_cubic(0.0, g, h_sym, t)
        assert pa.coeffs == ps.coeffs

    def test_validation(self):
        with pytest.raises(DomainError):
            TaylorPoly(0, 2, {})
        with pytest.raises(DomainError):
            TaylorPoly(2, 0, {})
        with pytest.raises(DimError):
            TaylorPoly(2, 2, {(1,): 1.0})
        with pytest.raises(DomainError):
            TaylorPoly(2, 2, {(2, 1): 1.0})
        with pytest.raises(DomainError):
            TaylorPoly(2, 2, {(1, 0): math.nan})
        with pytest.raises(DimError):
            TaylorPoly(2, 2, {}).evaluate(np.zeros(3))


class TestHomogenize:
    def test_quadratic_entry(self):
        p = TaylorPoly(2, 2, {(2, 0): 1.0})
        t = homogenize(p)
        assert (t.order, t.dim) == (2, 3)
        assert t.entry(2, 2) == pytest.approx(1.0)

    def test_linear_entry_in_cubic(self):
        p = TaylorPoly(2, 3, {(1, 0): 5.0})
        t = homogenize(p)
        assert (t.order, t.dim) == (3, 3)
        # the class mixes two lifted coordinates and one variable slot, so
        # the stored entry carries a multinomial weight of one third
        assert t.entry(1, 1, 2) == pytest.approx(5.0 / 3.0)

    def test_lifted_form_reproduces_polynomial(self):
        p = random_cubic(4, 31, scales=(1.0, 1.0, 1.0))
        t = homogenize(p)
        rng = np.random.default_rng(3)
        for _ in range(10):
            s = rng.standard_normal(4)
            lifted = np.concatenate(([1.0], s))
            assert t.apply_full(lifted) == pytest.approx(
                p.evaluate(s), rel=1e-10, abs=1e-12)


class TestLagrangianGrad:
    def test_matches_parts(self):
        p = random_cubic(3, 7)
        s = np.array([0.5, -1.0, 2.0])
        out = lagrangian_grad(p, s, 1.5)
        assert np.allclose(out, p.gradient(s) + 1.5 * s, rtol=1e-14)


class TestSolveBoundary:
    def test_linear_oracle(self):
        # minimizing s_1 over |s| = 2 lands at -2 e_1 with multiplier 1/2
        p = TaylorPoly.from_cubic(0.0, np.array([1.0, 0.0, 0.0]),
                                  np.zeros((3, 3)), np.zeros((3, 3, 3)))
        res = solve_boundary(p, 2.0)
        assert res.converged
        assert np.allclose(res.s, [-2.0, 0.0, 0.0], atol=1e-8)
        assert res.lambda_ == pytest.approx(0.5, abs=1e-8)
        assert res.value == pytest.approx(-2.0, abs=1e-8)
        assert res.grad_lagrangian_norm <= 1e-5

    def test_quadratic_oracle(self):
        # smallest eigenvalue -3 of the Hessian fixes step, value, and
        # multiplier on the unit sphere
        h = np.diag([-3.0, 1.0, 2.0])
        p = TaylorPoly.from_cubic(0.0, np.zeros(3), h, np.zeros((3, 3, 3)))
        config = BoundaryConfig(s0=np.array([0.3, 0.2, 0.1]))
        res = solve_boundary(p, 1.0, config)
        assert res.converged
        assert abs(res.s[0]) == pytest.approx(1.0, abs=1e-6)
        assert res.lambda_ == pytest.approx(3.0, abs=1e-6)
        assert res.value == pytest.approx(-1.5, abs=1e-8)
        min_eig, ok = check_second_order(p, res.s, res.lambda_)
        assert ok
        assert min_eig == pytest.approx(4.0, abs=1e-5)

    def test_zero_init_quadratic_reports_failure(self):
        # with no gradient the origin is a fixed point of the sweeps, so
        # the solver cannot reach the boundary and must say so
        h = np.diag([2.0, 3.0])
        p = TaylorPoly.from_cubic(0.0, np.zeros(2), h, np.zeros((2, 2, 2)))
        res = solve_boundary(p, 1.0, BoundaryConfig(max_outer=20))
        assert not res.converged
        assert np.linalg.norm(res.s) < 1e-12

    def test_delta_validated(self):
        p = random_cubic(3, 1)
        with pytest.raises(DomainError):
            solve_boundary(p, 0.0)
        with pytest.raises(DomainError):
            solve_boundary(p, -1.0)

    def test_s0_shape_checked(self):
        p = random_cubic(3, 1)
        with pytest.raises(ConfigError):
            solve_boundary(p, 1.0, BoundaryConfig(s0=np.zeros(4)))

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            BoundaryConfig(gamma=-1.0)
        with pytest.raises(ConfigError):
            BoundaryConfig(tol=0.0)
        with pytest.raises(ConfigError):
            BoundaryConfig(lambda_update_sign=0.5)

    def test_plus_sign_variant_runs(self):
        p = random_cubic(3, 2)
        config = BoundaryConfig(lambda_update_sign=1.0, max_outer=10)
        res = solve_boundary(p, 2.0, config)
        assert math.isfinite(res.lambda_)
        assert math.isfinite(res.value)

    @pytest.mark.parametrize("seed,n", [(1000, 3), (1002, 5)])
    def test_cubic_battery_member(self, seed, n):
        p = random_cubic(n, seed)
        res = solve_boundary(p, 2.0)
        assert res.converged
        assert res.grad_lagrangian_norm <= 1e-5
        assert abs(np.linalg.norm(res.s) - 2.0) <= 1e-9
        assert res.lambda_ > 0.0
        for a, b in zip(res.history, res.history[1:]):
            assert b <= a + 1e-9 * max(1.0, abs(a))
        _, ok = check_second_order(p, res.s, res.lambda_)
        assert ok

    def test_near_global_on_samples(self):
        p = random_cubic(3, 1000)
        res = solve_boundary(p, 2.0)
        rng = np.random.default_rng(99)
        dirs = rng.standard_normal((20000, 3))
        dirs *= 2.0 / np.linalg.norm(dirs, axis=1, keepdims=True)
        assert res.value <= float(p.evaluate_many(dirs).min()) + 1e-2


class TestCheckSecondOrder:
    def test_zero_polynomial_with_shift(self):
        p = TaylorPoly(2, 2, {})
        min_eig, ok = check_second_order(p, np.array([1.0, 0.0]), 1.0)
        assert min_eig == pytest.approx(1.0, rel=1e-12)
        assert ok

    def test_univariate_is_vacuous(self):
        p = TaylorPoly(1, 2, {(2,): 1.0})
        min_eig, ok = check_second_order(p, np.array([1.0]), 0.0)
        assert min_eig == math.inf
        assert ok

    def test_detects_saddle(self):
        h = np.diag([-3.0, 1.0, 2.0])
        p = TaylorPoly.from_cubic(0.0, np.zeros(3), h, np.zeros((3, 3, 3)))
        # e_2 is stationary with multiplier -1 but not a minimizer
        min_eig, ok = check_second_order(p, np.array([0.0, 1.0, 0.0]), -1.0)
        assert not ok
        assert min_eig == pytest.approx(-4.0, abs=1e-10)

    def test_shape_checked(self):
        p = TaylorPoly(2, 2, {})
        with pytest.raises(DimError):
            check_second_order(p, np.zeros(3), 0.0)


class TestRandomCubic:
    def test_reproducible(self):
        assert random_cubic(4, 9).coeffs == random_cubic(4, 9).coeffs
        assert random_cubic(4, 9).coeffs != random_cubic(4, 10).coeffs

    def test_scales_act_linearly(self):
        base = random_cubic(3, 5, scales=(1.0, 0.0, 0.0))
        doubled = random_cubic(3, 5, scales=(2.0, 0.0, 0.0))
        for alpha, coeff in base.coeffs.items():
            assert doubled.coeffs[alpha] == pytest.approx(2.0 * coeff,
                                                          rel=1e-12)

    def test_validation(self):
        with pytest.raises(DomainError):
            random_cubic(0, 1)


class TestSerialization:
    def test_dict_round_trip(self):
        p = random_cubic(3, 13)
        q = load_poly(poly_to_dict(p))
        assert q.coeffs == p.coeffs
        assert (q.n, q.p) == (p.n, p.p)

    def test_file_round_trip(self, tmp_path):
        p = random_cubic(2, 21)
        path = tmp_path / "poly.json"
        path.write_text(json.dumps(poly_to_dict(p)))
        q = load_poly(path)
        assert q.coeffs == p.coeffs

    def test_dense_blocks_form(self):
        g, h, t = cubic_blocks(3, 41)
        doc = {"n": 3, "p": 3, "f0": 0.5, "g": g.tolist(),
               "H": h.tolist(), "T": t.tolist()}
        q = load_poly(doc)
        expect = TaylorPoly.from_cubic(0.5, g, h, t)
        s = np.array([0.2, -0.7, 1.1])
        assert q.evaluate(s) == pytest.approx(expect.evaluate(s), rel=1e-12)

    def test_parse_errors(self, tmp_path):
        with pytest.raises(ParseError):
            load_poly({"n": 2})
        with pytest.raises(ParseError):
            load_poly({"n": 2, "p": 2})
        with pytest.raises(ParseError):
            load_poly({"n": 2, "p": 3, "terms": [], "g": [0.0, 0.0]})
        with pytest.raises(ParseError):
            load_poly({"n": 2, "p": 2,
                       "terms": [{"alpha": [1, 0]}]})
        with pytest.raises(ParseError):
            load_poly({"n": 2, "p": 2,
                       "terms": [{"alpha": [1, 0], "coeff": 1.0},
                                 {"alpha": [1, 0], "coeff": 2.0}]})
        with pytest.raises(ParseError):
            load_poly({"n": 2, "p": 2, "g": [1.0, 0.0],
                       "H": [[0.0] * 2] * 2, "T": [[[0.0] * 2] * 2] * 2})
        with pytest.raises(ParseError):
            load_poly({"n": 2, "p": 3, "g": [1.0, 0.0]})
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ParseError):
            load_poly(bad)
        with pytest.raises(ParseError):
            load_poly({"n": 2, "p": 2,
                       "terms": [{"alpha": [1, 0, 0], "coeff": 1.0}]})
