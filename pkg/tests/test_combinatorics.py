import math

import numpy as np
import pytest

from spde_pv.combinatorics import (
    MAX_PERMANENT_SIZE,
    alpha_permanent,
    complete_bell,
    cycle_count,
    gaussian_even_moment,
)

import oracles


def random_symmetric(rng, p):
    a = rng.standard_normal((p, p))
    return a + a.T


def random_psd(rng, p):
    a = rng.standard_normal((p, p))
    return a @ a.T


class TestCycleCount:
    @pytest.mark.parametrize(
        "perm,expected",
        [((1, 2, 3), 3), ((2, 1, 3), 2), ((2, 3, 1), 1), ((1,), 1), ((4, 3, 2, 1), 2)],
    )
    def test_examples(self, perm, expected):
        assert cycle_count(perm) == expected

    @pytest.mark.parametrize("bad", [(1, 1, 3), (0, 1, 2), (2, 3), ()])
    def test_rejects_non_bijections(self, bad):
        with pytest.raises(ValueError):
            cycle_count(bad)


class TestAlphaPermanent:
    def test_single_entry(self):
        for alpha in (-1.0, 0.5, 2.0):
            assert alpha_permanent([[3.0]], alpha) == pytest.approx(alpha * 3.0)

    def test_identity_half(self):
        assert alpha_permanent(np.eye(2), 0.5) == pytest.approx(0.25)

    def test_rank_one_all_ones_alpha_minus_one(self):
        a = np.ones((2, 2))
        assert alpha_permanent(a, -1.0) == pytest.approx(0.0, abs=1e-14)
        assert alpha_permanent(a, -1.0) == pytest.approx((-1.0) ** 2 * np.linalg.det(a), abs=1e-14)

    def test_alpha_one_is_classical_permanent(self):
        rng = np.random.Generator(np.random.Philox(7))
        for _ in range(5):
            a = random_symmetric(rng, 4)
            assert alpha_permanent(a, 1.0) == pytest.approx(oracles.permanent_minor_expansion(a), rel=1e-12)

    @pytest.mark.parametrize("p", [2, 3, 4, 5, 6])
    def test_alpha_minus_one_is_signed_determinant(self, p):
        rng = np.random.Generator(np.random.Philox(100 + p))
        a = random_symmetric(rng, p)
        assert alpha_permanent(a, -1.0) == pytest.approx((-1.0) ** p * np.linalg.det(a), abs=1e-10)

    def test_brute_force_cross_check(self):
        # independent re-enumeration with explicit cycle counting through cycle_count
        import itertools

        rng = np.random.Generator(np.random.Philox(13))
        a = random_symmetric(rng, 5)
        alpha = 0.5
        expected = 0.0
        for sigma in itertools.permutations(range(5)):
            prod = math.prod(a[i, sigma[i]] for i in range(5))
            expected += alpha ** cycle_count(tuple(s + 1 for s in sigma)) * prod
        assert alpha_permanent(a, alpha) == pytest.approx(expected, rel=1e-12)

    def test_size_guard(self):
        big = np.eye(MAX_PERMANENT_SIZE + 1)
        with pytest.raises(ValueError, match="capped"):
            alpha_permanent(big, 1.0)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            alpha_permanent([[1.0, 2.0], [0.0, 1.0]], 1.0)


class TestGaussianEvenMoment:
    @pytest.mark.parametrize("p", [1, 2, 3, 4, 5, 6])
    def test_independent_standard_normals(self, p):
        assert gaussian_even_moment(np.eye(p)) == pytest.approx(1.0, rel=1e-12)

    def test_single_variable_variance(self):
        assert gaussian_even_moment([[2.7]]) == pytest.approx(2.7)

    def test_bivariate_closed_form(self):
        rho = 0.6
        c = np.array([[1.0, rho], [rho, 1.0]])
        assert gaussian_even_moment(c) == pytest.approx(1.0 + 2.0 * rho**2, rel=1e-12)

    @pytest.mark.parametrize("p", [2, 3, 4])
    def test_matches_wick_enumeration(self, p):
        rng = np.random.Generator(np.random.Philox(200 + p))
        c = random_psd(rng, p)
        assert gaussian_even_moment(c) == pytest.approx(oracles.wick_even_moment(c), rel=1e-10)

    def test_monte_carlo_confirmation(self):
        rho = 0.4
        c = np.array([[1.0, rho], [rho, 1.0]])
        rng = np.random.Generator(np.random.Philox(99))
        chol = np.linalg.cholesky(c)
        total = 0.0
        n = 10_000_000
        batch = 1_000_000
        for _ in range(n // batch):
            x = rng.standard_normal((batch, 2)) @ chol.T
            total += float(np.sum(x[:, 0] ** 2 * x[:, 1] ** 2))
        assert total / n == pytest.approx(gaussian_even_moment(c), abs=1e-2)

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError, match="positive semidefinite"):
            gaussian_even_moment([[1.0, 2.0], [2.0, 1.0]])


class TestCompleteBell:
    def test_first_polynomials(self):
        assert complete_bell([5.0]) == pytest.approx(5.0)
        assert complete_bell([2.0, 3.0]) == pytest.approx(7.0)
        assert complete_bell([1.0, 1.0, 1.0]) == pytest.approx(5.0)  # Bell number B_3

    def test_bell_numbers_up_to_seven(self):
        bell_numbers = [1, 2, 5, 15, 52, 203, 877]
        for p, b in enumerate(bell_numbers, start=1):
            assert complete_bell([1.0] * p) == pytest.approx(b)

    @pytest.mark.parametrize("p", range(1, 8))
    def test_matches_partition_enumeration(self, p):
        rng = np.random.Generator(np.random.Philox(300 + p))
        xs = rng.uniform(-2.0, 2.0, size=p)
        assert complete_bell(xs) == pytest.approx(oracles.bell_by_partitions(list(xs)), rel=1e-10, abs=1e-10)

    @pytest.mark.parametrize("p", range(1, 8))
    def test_matches_multinomial_formula(self, p):
        rng = np.random.Generator(np.random.Philox(400 + p))
        xs = rng.uniform(0.1, 1.5, size=p)
        assert complete_bell(xs) == pytest.approx(oracles.bell_by_multinomial(list(xs)), rel=1e-10)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            complete_bell([])
