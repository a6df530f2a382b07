import numpy as np
import pytest
from numpy.polynomial import legendre

from dgins.quadrature import gauss_rule, gll_nodes, gll_rule


def legendre_coeffs(n):
    c = np.zeros(n + 1)
    c[n] = 1.0
    return c


class TestGaussRule:
    def test_midpoint(self):
        r = gauss_rule(1)
        assert r.points == pytest.approx([0.0])
        assert r.weights == pytest.approx([2.0])

    def test_two_points(self):
        # oracle: roots of P_2 computed independently
        roots = legendre.legroots(legendre_coeffs(2))
        r = gauss_rule(2)
        np.testing.assert_allclose(r.points, np.sort(roots), atol=1e-15)
        np.testing.assert_allclose(r.points, [-1 / np.sqrt(3), 1 / np.sqrt(3)],
                                   atol=1e-15)
        np.testing.assert_allclose(r.weights, [1.0, 1.0], atol=1e-15)

    def test_three_points(self):
        r = gauss_rule(3)
        np.testing.assert_allclose(
            r.points, [-np.sqrt(3 / 5), 0.0, np.sqrt(3 / 5)], atol=1e-15)
        np.testing.assert_allclose(r.weights, [5 / 9, 8 / 9, 5 / 9], atol=1e-15)

    @pytest.mark.parametrize("n", range(1, 16))
    def test_against_numpy_leggauss(self, n):
        x, w = np.polynomial.legendre.leggauss(n)
        r = gauss_rule(n)
        np.testing.assert_allclose(r.points, x, atol=5e-15)
        np.testing.assert_allclose(r.weights, w, atol=5e-15)

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 12])
    def test_monomial_exactness(self, n):
        # exact for degree <= 2n-1, tested against analytic integrals
        r = gauss_rule(n)
        for p in range(2 * n):
            exact = 0.0 if p % 2 == 1 else 2.0 / (p + 1)
            assert np.dot(r.weights, r.points**p) == pytest.approx(exact, abs=1e-13)

    @pytest.mark.parametrize("n", range(1, 14))
    def test_weights_positive_sum_two(self, n):
        r = gauss_rule(n)
        assert (r.weights > 0).all()
        assert r.weights.sum() == pytest.approx(2.0, abs=1e-14)

    def test_overintegration_exact_for_cubic_degree(self):
        # n_q = floor(3k/2)+1 integrates x^(3k) exactly
        for k in range(1, 9):
            n = (3 * k) // 2 + 1
            r = gauss_rule(n)
            p = 3 * k
            exact = 0.0 if p % 2 else 2.0 / (p + 1)
            assert np.dot(r.weights, r.points**p) == pytest.approx(exact, abs=1e-12)

    def test_rejects_zero_points(self):
        with pytest.raises(ValueError):
            gauss_rule(0)


class TestGllNodes:
    def test_k1(self):
        np.testing.assert_allclose(gll_nodes(1), [-1.0, 1.0])

    def test_k2(self):
        np.testing.assert_allclose(gll_nodes(2), [-1.0, 0.0, 1.0], atol=1e-15)

    def test_k3(self):
        # oracle: roots of P_3' computed via numpy polynomial derivative
        dP3 = legendre.legder(legendre_coeffs(3))
        interior = np.sort(legendre.legroots(dP3))
        expected = np.concatenate(([-1.0], interior, [1.0]))
        np.testing.assert_allclose(gll_nodes(3), expected, atol=1e-15)
        np.testing.assert_allclose(
            gll_nodes(3), [-1, -1 / np.sqrt(5), 1 / np.sqrt(5), 1], atol=1e-15)

    @pytest.mark.parametrize("k", range(2, 12))
    def test_interior_are_derivative_roots(self, k):
        dPk = legendre.legder(legendre_coeffs(k))
        expected = np.concatenate(([-1.0], np.sort(legendre.legroots(dPk)), [1.0]))
        np.testing.assert_allclose(gll_nodes(k), expected, atol=5e-15)

    @pytest.mark.parametrize("k", range(1, 12))
    def test_sorted_symmetric(self, k):
        x = gll_nodes(k)
        assert len(x) == k + 1
        assert (np.diff(x) > 0).all()
        np.testing.assert_allclose(x, -x[::-1], atol=1e-15)

    def test_rejects_k0(self):
        with pytest.raises(ValueError):
            gll_nodes(0)


def test_gll_rule_exactness():
    for k in range(1, 10):
        r = gll_rule(k)
        for p in range(2 * k):
            exact = 0.0 if p % 2 else 2.0 / (p + 1)
            assert np.dot(r.weights, r.points**p) == pytest.approx(exact, abs=1e-13)
