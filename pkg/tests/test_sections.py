import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from ellipsec.ellipsoid import Ellipsoid
from ellipsec.sections import (
    RankDeficientError,
    Subspace,
    coordinate_tail_subspace,
    kernel_basis,
    large_coordinate_witness,
    lower_bound_witness,
    witness_condition,
    radius_maximize,
    radius_oracle_bruteforce,
    radius_p2_exact,
    random_section_radius_trials,
    sample_gaussian_info,
    section_radius,
)


def _line(v):
    v = np.asarray(v, float)
    return Subspace((v / np.linalg.norm(v))[:, None], v.size - 1)


def _check_witness(E, S, r):
    assert S.residual(r.witness) <= 1e-8
    assert E.gauge(r.witness) == pytest.approx(1.0, abs=1e-6)
    assert r.value == pytest.approx(np.linalg.norm(r.witness), abs=1e-9)


class TestInfoMatrix:
    def test_deterministic(self):
        a = sample_gaussian_info(3, 7, 42)
        b = sample_gaussian_info(3, 7, 42)
        np.testing.assert_array_equal(a.entries, b.entries)
        assert not np.array_equal(a.entries, sample_gaussian_info(3, 7, 43).entries)

    def test_rows_are_nested(self):
        big = sample_gaussian_info(5, 9, 1, 2).entries
        small = sample_gaussian_info(3, 9, 1, 2).entries
        np.testing.assert_array_equal(big[:3], small)

    def test_rejects_n_ge_m(self):
        with pytest.raises(ValueError):
            sample_gaussian_info(4, 4, 0)

    def test_column_means(self):
        G = np.vstack([sample_gaussian_info(1, 5, 0, t).entries for t in range(10_000)])
        assert np.all(np.abs(G.mean(axis=0)) <= 4 / math.sqrt(10_000))

    def test_kernel_line_is_uniform(self):
        angles = []
        for t in range(10_000):
            x = kernel_basis(sample_gaussian_info(1, 2, 7, t)).basis[:, 0]
            angles.append(math.atan2(x[1], x[0]) % math.pi)
        assert stats.kstest(angles, stats.uniform(0, math.pi).cdf).pvalue > 0.01


class TestKernel:
    def test_examples(self):
        S = kernel_basis(np.array([[0.0, 1.0]]))
        np.testing.assert_allclose(np.abs(S.basis[:, 0]), [1, 0], atol=1e-15)
        assert S.codim == 1
        S = kernel_basis(np.array([[1.0, 0, 0], [0, 1.0, 0]]))
        np.testing.assert_allclose(np.abs(S.basis[:, 0]), [0, 0, 1], atol=1e-15)

    @given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_residuals(self, n, extra, seed):
        N = sample_gaussian_info(n, n + extra, seed).entries
        S = kernel_basis(N)
        assert S.dim == extra
        assert np.max(np.abs(N @ S.basis)) <= 1e-8 * np.max(np.abs(N))
        assert S.orthonormality_residual() <= 1e-10

    def test_rank_deficient(self):
        with pytest.raises(RankDeficientError):
            kernel_basis(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]))

    def test_coordinate_tail(self):
        np.testing.assert_array_equal(coordinate_tail_subspace(3, 0).basis, np.eye(3))
        np.testing.assert_array_equal(coordinate_tail_subspace(3, 2).basis, np.eye(3)[:, 2:])
        with pytest.raises(ValueError):
            coordinate_tail_subspace(3, 3)


class TestExactP2:
    def test_hand_example(self):
        E = Ellipsoid(2, [2.0, 1.0])
        r = radius_p2_exact(E, _line([1, 1]))
        assert r.value == pytest.approx(math.sqrt(8 / 5), abs=1e-12)
        _check_witness(E, _line([1, 1]), r)

    @given(st.lists(st.floats(0.01, 100), min_size=2, max_size=32), st.data())
    def test_coordinate_tail(self, vals, data):
        sigma = np.sort(vals)[::-1]
        n = data.draw(st.integers(0, sigma.size - 1))
        r = radius_p2_exact(Ellipsoid(2, sigma), coordinate_tail_subspace(sigma.size, n))
        assert r.value == pytest.approx(sigma[n], rel=1e-12)

    def test_full_space(self):
        assert radius_p2_exact(Ellipsoid(2, [3.0, 1.0, 0.5]), coordinate_tail_subspace(3, 0)).value == pytest.approx(3.0)

    def test_rejects_other_p(self):
        with pytest.raises(ValueError):
            radius_p2_exact(Ellipsoid(1.5, [1.0, 1.0]), _line([1, 1]))


class TestMultistart:
    def test_cross_polytope_diagonal(self):
        E = Ellipsoid(1, [1.0, 1.0])
        r = radius_maximize(E, _line([1, 1]))
        assert r.value == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    @given(st.sampled_from([0.5, 1.0, 1.5, 3.0, math.inf]), st.integers(2, 5), st.integers(0, 2**32 - 1))
    def test_witness_invariants(self, p, m, seed):
        E = Ellipsoid.polynomial(p, m, 0.6)
        S = kernel_basis(sample_gaussian_info(1, m, seed))
        r = radius_maximize(E, S, seed=seed)
        _check_witness(E, S, r)

    @pytest.mark.parametrize("trial", range(10))
    def test_matches_exact_for_p2(self, trial):
        m = 4 + (12 * trial) // 9
        rng = np.random.default_rng(trial)
        sigma = np.sort(rng.uniform(0.1, 3, m))[::-1]
        E = Ellipsoid(2.0, sigma)
        S = kernel_basis(sample_gaussian_info(m // 3, m, trial))
        exact = radius_p2_exact(E, S).value
        ms = radius_maximize(E, S, restarts=20, seed=trial, delegate=False)
        assert ms.value <= exact * (1 + 1e-12)
        assert (exact - ms.value) / exact <= 1e-6

    @pytest.mark.parametrize("p", [0.5, 1.0, 1.5, math.inf])
    def test_full_space_axis(self, p):
        E = Ellipsoid(p, [2.0, 1.0, 0.5])
        r = radius_maximize(E, coordinate_tail_subspace(3, 0))
        assert r.value >= 2.0 - 1e-12
        if p <= 2:
            assert r.value == pytest.approx(2.0, abs=1e-9)
        else:
            assert r.value == pytest.approx(E.circumradius(), rel=1e-9)

    @pytest.mark.parametrize("p", [0.5, 1.0, 1.5, math.inf])
    def test_against_bruteforce(self, p):
        rng = np.random.default_rng(int(100 * min(p, 5)))
        for t in range(6):
            m = int(rng.integers(2, 5))
            n = int(rng.integers(max(1, m - 3), m))
            sigma = np.sort(rng.uniform(0.2, 2.0, m))[::-1]
            E = Ellipsoid(p, sigma)
            S = kernel_basis(sample_gaussian_info(n, m, 5, t))
            ms = radius_maximize(E, S, seed=t).value
            bf = radius_oracle_bruteforce(E, S).value
            assert abs(ms - bf) <= 0.01 * bf

    def test_tail_of_cube(self):
        E = Ellipsoid(math.inf, [1.5, 1.0, 0.8, 0.5])
        r = radius_maximize(E, coordinate_tail_subspace(4, 1))
        assert r.value == pytest.approx(math.sqrt(1.0 + 0.64 + 0.25), rel=1e-9)


class TestBruteforce:
    def test_hand_example(self):
        E = Ellipsoid(2, [2.0, 1.0])
        assert radius_oracle_bruteforce(E, _line([1, 1])).value == pytest.approx(math.sqrt(8 / 5), abs=1e-12)
        S = kernel_basis(np.array([[1.0, -1.0, 0.3]]))
        bf = radius_oracle_bruteforce(Ellipsoid(2, [2.0, 1.0, 0.5]), S, grid_density=100_000).value
        assert bf == pytest.approx(radius_p2_exact(Ellipsoid(2, [2.0, 1.0, 0.5]), S).value, abs=1e-3)

    def test_rejects_large_dimension(self):
        with pytest.raises(ValueError):
            radius_oracle_bruteforce(Ellipsoid.ball(2, 5), coordinate_tail_subspace(5, 1))

    def test_quasi_refinement_is_monotone_and_feasible(self):
        E = Ellipsoid(0.5, [1.0, 0.7, 0.4])
        S = kernel_basis(sample_gaussian_info(1, 3, 8))
        vals = [radius_oracle_bruteforce(E, S, grid_density=d, vertices=False).value for d in (100, 1_000, 10_000, 100_000)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        rng = np.random.default_rng(0)
        for c in rng.standard_normal((500, S.dim)):
            x = S.basis @ c
            assert np.linalg.norm(x / E.gauge(x)) <= vals[-1] + 1e-12


class TestLargeCoordinate:
    def test_examples(self):
        lc = large_coordinate_witness(np.array([[0.0, 1.0]]))
        assert lc.x1sq == pytest.approx(1.0) and abs(lc.x[0]) == pytest.approx(1.0)
        lc = large_coordinate_witness(np.array([[1.0, 0.0]]))
        assert lc.x1sq == pytest.approx(0.0, abs=1e-28) and lc.degenerate

    def test_beta_half_half(self):
        vals = [large_coordinate_witness(sample_gaussian_info(1, 2, 3, t).entries).x1sq for t in range(100_000)]
        assert np.mean(vals) == pytest.approx(0.5, abs=4 * math.sqrt(1 / 8 / 100_000))
        assert stats.kstest(vals[:5000], stats.beta(0.5, 0.5).cdf).pvalue > 0.01

    @given(st.integers(1, 6), st.integers(2, 10), st.integers(0, 2**32 - 1))
    def test_is_maximizer(self, n, extra, seed):
        N = sample_gaussian_info(n, n + extra, seed).entries
        S = kernel_basis(N)
        lc = large_coordinate_witness(S)
        assert S.residual(lc.x) <= 1e-10
        Y = np.random.default_rng(seed).standard_normal((1000, S.dim)) @ S.basis.T
        Y /= np.linalg.norm(Y, axis=1, keepdims=True)
        assert np.all(Y[:, 0] ** 2 <= lc.x1sq + 1e-12)


class TestLowerWitness:
    def test_scope(self):
        with pytest.raises(ValueError):
            lower_bound_witness(Ellipsoid.ball(3, 4), sample_gaussian_info(1, 4, 0))

    def test_kernel_contains_e1(self):
        N = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        w = lower_bound_witness(Ellipsoid(1.5, [2.0, 1.0, 1.0]), N)
        assert w.feasible and w.gauge == pytest.approx(0.5 / 1.5)
        assert w.norm2 == pytest.approx(2 / 3)

    def test_unit_semiaxes_norm(self):
        w = lower_bound_witness(Ellipsoid.ball(2, 400), sample_gaussian_info(1, 400, 4))
        assert w.feasible and w.norm2 == pytest.approx(0.5)

    def test_floor_is_lower_bound(self):
        E = Ellipsoid.polynomial(1.5, 4, 0.3)
        for t in range(10):
            N = sample_gaussian_info(2, 4, 1, t)
            S = kernel_basis(N)
            w = lower_bound_witness(E, N)
            assert w.radius_floor <= radius_oracle_bruteforce(E, S).value * (1 + 1e-9)

    def test_condition(self):
        E = Ellipsoid.polynomial(2, 400, 0.25)
        assert witness_condition(E, 5, 0.25)
        assert not witness_condition(Ellipsoid.polynomial(2, 399, 0.25), 5, 0.25)


class TestTrials:
    def test_floor(self):
        E = Ellipsoid(2, [1, 1 / 2, 1 / 3, 1 / 4])
        tr = random_section_radius_trials(E, 1, 100, seed=0)
        assert tr.radii.min() >= 0.5 - 1e-9 and tr.floor_ok

    def test_last_codimension_median(self):
        E = Ellipsoid.polynomial(2, 6, 1.0)
        tr = random_section_radius_trials(E, 5, 50, seed=1)
        assert tr.median >= E.sigma[-1]

    def test_reproducible_and_thread_independent(self):
        E = Ellipsoid.polynomial(1.5, 8, 1.0)
        a = random_section_radius_trials(E, 3, 6, method="multistart", seed=2, threads=1)
        b = random_section_radius_trials(E, 3, 6, method="multistart", seed=2, threads=4)
        np.testing.assert_array_equal(a.radii, b.radii)

    def test_nested_kernels_monotone(self):
        E = Ellipsoid.polynomial(1.5, 6, 0.5)
        for t in range(5):
            prev = math.inf
            for n in range(1, 5):
                S = kernel_basis(sample_gaussian_info(n, 6, 9, t))
                r = section_radius(E, S, "multistart", seed=9, keys=(t,)).value
                assert r <= prev * (1 + 1e-6)
                prev = r

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            random_section_radius_trials(Ellipsoid.ball(2, 4), 1, 2, method="nope")
