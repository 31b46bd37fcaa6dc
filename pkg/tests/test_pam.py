"""Block-sweep solver tests: exact subproblem oracles plus small instances
with known closed-form optima.
"""

import csv
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specteig import (ArityError, ConfigError, DomainError, Given, PamConfig,
                      SymTensor, Uniform, identity_tensor, kl_exponent,
                      pam_solve)
from specteig.pam import (block_update, h_alpha_multilinear,
                          homogeneous_value, pair_partial, pair_product,
                          write_history_csv)

from conftest import dense_multilinear, dense_partial, random_symtensor, to_dense

A1 = SymTensor.from_entries(2, 2, [((1, 1), 1.0), ((2, 2), -2.0)])
SQRT5 = math.sqrt(5.0)


class TestPairProduct:
    def test_two_blocks_is_inner_product(self):
        x = np.array([1.0, 2.0, -1.0])
        y = np.array([0.5, -1.0, 3.0])
        assert pair_product([x, y]) == pytest.approx(float(np.dot(x, y)),
                                                     rel=1e-14)

    @pytest.mark.parametrize("d,n", [(4, 2), (4, 3), (6, 2)])
    def test_matches_dense_identity_form(self, d, n):
        arr = to_dense(identity_tensor(d, n))
        rng = np.random.default_rng(d * 100 + n)
        for _ in range(5):
            blocks = [rng.standard_normal(n) for _ in range(d)]
            assert pair_product(blocks) == pytest.approx(
                dense_multilinear(arr, blocks), rel=1e-10, abs=1e-12)

    def test_diagonal_is_norm_power(self):
        w = np.array([0.6, -0.8, 1.0])
        for d in (2, 4, 6):
            assert pair_product([w] * d) == pytest.approx(
                float(np.dot(w, w)) ** (d // 2), rel=1e-12)

    def test_odd_count_rejected(self):
        x = np.ones(2)
        with pytest.raises(ArityError):
            pair_product([x, x, x])
        with pytest.raises(ArityError):
            pair_partial([x, x, x], 0)


class TestPairPartial:
    def test_two_blocks(self):
        x = np.array([1.0, 2.0])
        y = np.array([-3.0, 0.5])
        assert np.allclose(pair_partial([x, y], 0), y, rtol=1e-14)
        assert np.allclose(pair_partial([x, y], 1), x, rtol=1e-14)

    def test_dot_recovers_value(self):
        rng = np.random.default_rng(7)
        blocks = [rng.standard_normal(3) for _ in range(4)]
        for slot in range(4):
            g = pair_partial(blocks, slot)
            assert float(np.dot(g, blocks[slot])) == pytest.approx(
                pair_product(blocks), rel=1e-12)

    def test_matches_dense_identity_partial(self):
        arr = to_dense(identity_tensor(4, 3))
        rng = np.random.default_rng(9)
        blocks = [rng.standard_normal(3) for _ in range(4)]
        expect = dense_partial(arr, blocks[1:])
        assert np.allclose(pair_partial(blocks, 0), expect, rtol=1e-10)


class TestSurrogateValues:
    def test_matrix_example(self):
        e2 = np.array([0.0, 1.0])
        val = h_alpha_multilinear(A1, SQRT5, [e2, e2])
        assert val == pytest.approx(-2.0 - SQRT5, rel=1e-14)
        assert homogeneous_value(A1, SQRT5, e2) == pytest.approx(
            -2.0 - SQRT5, rel=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_diagonal_consistency(self, seed):
        rng = np.random.default_rng(seed)
        a = random_symtensor(4, 3, rng)
        w = rng.standard_normal(3)
        alpha = a.frobenius_norm()
        assert h_alpha_multilinear(a, alpha, [w] * 4) == pytest.approx(
            homogeneous_value(a, alpha, w), rel=1e-10, abs=1e-12)


class TestBlockUpdate:
    @staticmethod
    def _prox_obj(a, alpha, blocks, slot, gamma, prev, x):
        trial = list(blocks)
        trial[slot] = x
        return (h_alpha_multilinear(a, alpha, trial)
                + 0.5 * gamma * float(np.dot(x - prev, x - prev)))

    def test_beats_fine_circle_grid(self):
        rng = np.random.default_rng(31)
        a = random_symtensor(4, 2, rng)
        alpha = a.frobenius_norm()
        blocks = [rng.standard_normal(2) for _ in range(4)]
        blocks = [b / np.linalg.norm(b) for b in blocks]
        gamma = 1.0
        for slot in range(4):
            prev = blocks[slot].copy()
            out = block_update(a, alpha, blocks, slot, gamma, 1.0, prev)
            assert np.linalg.norm(out) == pytest.approx(1.0, rel=1e-12)
            angles = np.linspace(0.0, 2.0 * math.pi, 400001)
            obj_out = self._prox_obj(a, alpha, blocks, slot, gamma, prev,
                                     out)
            # the subproblem restricted to this block is linear plus the
            # proximal quadratic, so evaluate the grid through the same form
            others = [blocks[i] for i in range(4) if i != slot]
            c = (a.multilinear_partial(others, slot)
                 - alpha * pair_partial(blocks, slot))
            grid = np.stack([np.cos(angles), np.sin(angles)], axis=1)
            vals = grid @ c + 0.5 * gamma * ((grid - prev) ** 2).sum(axis=1)
            const = obj_out - (float(np.dot(c, out))
                               + 0.5 * gamma * float(
                                   np.dot(out - prev, out - prev)))
            assert obj_out <= float(vals.min()) + const + 1e-9
            blocks[slot] = out

    def test_degenerate_direction_keeps_block(self):
        prev = np.array([1.0, 0.0])
        y = np.array([1.0, 0.0])
        # c = A1 y = gamma * prev exactly, so the direction vanishes
        out = block_update(A1, 0.0, [prev, y], 0, 1.0, 1.0, prev)
        assert np.array_equal(out, prev)
        assert out is not prev

    def test_tiny_direction_tie_prefers_alignment(self):
        prev = np.array([1.0, 0.0])
        y = np.array([1.0 + 2e-14, 0.0])
        # direction norm 2e-14 with radius 0.1 puts the two candidate
        # objectives within the degeneracy tolerance of each other
        out = block_update(A1, 0.0, [prev, y], 0, 1.0, 0.1, prev)
        assert np.allclose(out, [0.1, 0.0])

    def test_moves_downhill(self):
        rng = np.random.default_rng(41)
        a = random_symtensor(4, 3, rng)
        alpha = a.frobenius_norm()
        blocks = [rng.standard_normal(3) for _ in range(4)]
        blocks = [b / np.linalg.norm(b) for b in blocks]
        prev = blocks[2].copy()
        before = self._prox_obj(a, alpha, blocks, 2, 2.0, prev, prev)
        out = block_update(a, alpha, blocks, 2, 2.0, 1.0, prev)
        after = self._prox_obj(a, alpha, blocks, 2, 2.0, prev, out)
        assert after <= before + 1e-12


class TestPamSolve:
    def test_matrix_global_minimum(self):
        # spectral oracle: the sphere minimum of the quadratic form is the
        # smallest eigenvalue, attained at the matching unit eigenvector
        eigval, eigvec = np.linalg.eigh(np.diag([1.0, -2.0]))[0][0], \
            np.array([0.0, 1.0])
        config = PamConfig(gammas=(1.0, 1.0), alpha=SQRT5, eps=1e-12,
                           seed=5)
        res = pam_solve(A1, config)
        assert res.converged
        assert res.value == pytest.approx(eigval - SQRT5, abs=1e-9)
        assert np.linalg.norm(np.abs(res.v) - np.abs(eigvec)) <= 1e-5
        assert res.kkt_residual <= 1e-4

    @pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
    def test_matrix_minimum_from_many_starts(self, seed):
        config = PamConfig(gammas=(1.0, 1.0), alpha=SQRT5, seed=seed)
        res = pam_solve(A1, config)
        assert res.converged
        assert res.value == pytest.approx(-2.0 - SQRT5, abs=1e-6)

    def test_alpha_zero_multilinear_matrix(self):
        # without the diagonal tie the blocks split into the +/- pair of the
        # dominant eigendirection, reaching -|lambda|_max
        a2 = SymTensor.from_entries(2, 2, [((1, 1), 2.0), ((2, 2), 4.0)])
        config = PamConfig(gammas=(1.0, 1.0), alpha=0.0, eps=1e-10, seed=3)
        res = pam_solve(a2, config)
        assert h_alpha_multilinear(a2, 0.0, list(res.blocks)) == \
            pytest.approx(-4.0, abs=1e-6)

    def test_surrogate_monotone(self):
        rng = np.random.default_rng(55)
        a = random_symtensor(4, 3, rng)
        config = PamConfig(gammas=(1.0,) * 4, seed=11)
        res = pam_solve(a, config)
        h_ts = [row[1] for row in res.history]
        for prev, cur in zip(h_ts, h_ts[1:]):
            assert cur <= prev + 1e-10

    def test_given_init_reaches_nearby_optimum(self):
        e2 = np.array([0.0, 1.0])
        config = PamConfig(gammas=(1.0, 1.0), alpha=SQRT5,
                           init=Given((e2, e2)))
        res = pam_solve(A1, config)
        assert res.converged
        assert res.iterations <= 2
        assert res.value == pytest.approx(-2.0 - SQRT5, abs=1e-9)

    def test_given_init_validation(self):
        e2 = np.array([0.0, 1.0])
        with pytest.raises(ConfigError):
            pam_solve(A1, PamConfig(gammas=(1.0, 1.0), init=Given((e2,))))
        with pytest.raises(ConfigError):
            pam_solve(A1, PamConfig(gammas=(1.0, 1.0),
                                    init=Given((e2, np.zeros(2)))))

    def test_order_mismatch(self):
        with pytest.raises(ArityError):
            pam_solve(A1, PamConfig(gammas=(1.0,) * 4))

    def test_low_alpha_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="specteig.pam"):
            pam_solve(A1, PamConfig(gammas=(1.0, 1.0), alpha=0.1, seed=1))
        assert any("Frobenius" in r.message for r in caplog.records)

    def test_default_alpha_silent(self, caplog):
        with caplog.at_level(logging.WARNING, logger="specteig.pam"):
            pam_solve(A1, PamConfig(gammas=(1.0, 1.0), seed=1))
        assert not [r for r in caplog.records
                    if "Frobenius" in r.message]


class TestConfigValidation:
    def test_rejects_bad_fields(self):
        with pytest.raises(ConfigError):
            PamConfig(gammas=())
        with pytest.raises(ConfigError):
            PamConfig(gammas=(1.0, -0.5))
        with pytest.raises(ConfigError):
            PamConfig(gammas=(1.0,), alpha=-1.0)
        with pytest.raises(ConfigError):
            PamConfig(gammas=(1.0,), eps=0.0)
        with pytest.raises(ConfigError):
            PamConfig(gammas=(1.0,), max_iter=0)
        with pytest.raises(ConfigError):
            PamConfig(gammas=(1.0, 1.0), radii=(1.0,))
        with pytest.raises(ConfigError):
            PamConfig(gammas=(1.0, 1.0), radii=(1.0, 0.0))


class TestHistoryCsv:
    def test_round_trip(self, tmp_path):
        config = PamConfig(gammas=(1.0, 1.0), alpha=SQRT5, seed=2)
        res = pam_solve(A1, config)
        path = tmp_path / "history.csv"
        write_history_csv(res.history, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iter", "h_t", "h_v", "step_norm"]
        assert len(rows) == len(res.history) + 1
        for row, rec in zip(rows[1:], res.history):
            assert int(row[0]) == rec[0]
            assert float(row[1]) == rec[1]
            assert float(row[3]) == rec[3]


class TestKlExponent:
    def test_pinned_value(self):
        tau, rate = kl_exponent(2, 2)
        assert tau == 1.0 / 54.0
        assert rate == pytest.approx((1.0 / 54.0) / (1.0 - 2.0 / 54.0),
                                     rel=1e-15)

    def test_formula_grid(self):
        for d in range(2, 9):
            for n in range(2, 9):
                tau, rate = kl_exponent(d, n)
                assert tau == pytest.approx(
                    1.0 / (d * (3 * d - 3) ** (d * n - 1)), rel=1e-15)
                assert 0.0 < tau < 0.5
                assert rate > 0.0

    def test_domain_errors(self):
        for bad in [(1, 2), (2, 1), (0, 0)]:
            with pytest.raises(DomainError):
                kl_exponent(*bad)
        with pytest.raises(DomainError):
            kl_exponent(2.0, 2)
