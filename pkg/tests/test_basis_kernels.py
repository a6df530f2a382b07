import numpy as np
import pytest

from dgins import kernels
from dgins.basis import get_basis, lagrange_values
from dgins.quadrature import gauss_rule


def dense_value_matrix(b):
    """Naive (q*q, m*m) interpolation matrix, row-major (y, x) on both sides."""
    q, m = b.S.shape
    return np.einsum("qi,pj->qpij", b.S, b.S).reshape(q * q, m * m)


def dense_grad_matrices(b):
    q, m = b.S.shape
    gx = np.einsum("qi,pj->qpij", b.S, b.D).reshape(q * q, m * m)
    gy = np.einsum("qi,pj->qpij", b.D, b.S).reshape(q * q, m * m)
    return gx, gy


def to_layout(U):
    """(ne, my, mx) element-major -> (my, ne, mx) kernel layout."""
    return np.ascontiguousarray(U.transpose(1, 0, 2))


def from_layout(F):
    return np.ascontiguousarray(F.transpose(1, 0, 2))


class TestBasisTables:
    @pytest.mark.parametrize("k,nq", [(1, 2), (2, 3), (4, 5), (7, 8), (4, 7)])
    def test_cardinal_property(self, k, nq):
        b = get_basis(k, nq)
        V = lagrange_values(b.nodes, b.nodes)
        np.testing.assert_allclose(V, np.eye(k + 1), atol=1e-13)

    @pytest.mark.parametrize("k,nq", [(2, 3), (3, 4), (5, 6), (7, 11)])
    def test_partition_of_unity(self, k, nq):
        b = get_basis(k, nq)
        np.testing.assert_allclose(b.S.sum(axis=1), 1.0, atol=1e-13)
        np.testing.assert_allclose(b.D.sum(axis=1), 0.0, atol=1e-12)

    def test_endpoint_rows_are_unit_vectors(self):
        b = get_basis(5, 6)
        e0 = np.zeros(6); e0[0] = 1
        e1 = np.zeros(6); e1[-1] = 1
        np.testing.assert_allclose(b.left_value, e0, atol=1e-13)
        np.testing.assert_allclose(b.right_value, e1, atol=1e-13)

    def test_derivative_table_exact_for_monomials(self):
        b = get_basis(4, 5)
        for p in range(5):
            coeffs = b.nodes**p
            deriv = b.D @ coeffs
            np.testing.assert_allclose(deriv, p * b.rule.points**max(p - 1, 0),
                                       atol=1e-12)


class TestVolumeKernels:
    @pytest.mark.parametrize("k,nq,ne", [(1, 2, 3), (4, 5, 7), (4, 7, 5), (7, 8, 2)])
    def test_values_match_dense(self, k, nq, ne, rng):
        b = get_basis(k, nq)
        U = rng.standard_normal((ne, k + 1, k + 1))
        dense = (dense_value_matrix(b) @ U.reshape(ne, -1).T).T
        got = kernels.vol_values(to_layout(U), b)
        np.testing.assert_allclose(from_layout(got).reshape(ne, -1), dense,
                                   rtol=1e-13, atol=1e-13)

    def test_gradients_match_dense(self, rng):
        k, nq, ne = 4, 5, 6
        b = get_basis(k, nq)
        U = rng.standard_normal((ne, k + 1, k + 1))
        gxm, gym = dense_grad_matrices(b)
        v, gx, gy = kernels.vol_values_and_gradients(to_layout(U), b)
        np.testing.assert_allclose(from_layout(gx).reshape(ne, -1),
                                   (gxm @ U.reshape(ne, -1).T).T, atol=1e-12)
        np.testing.assert_allclose(from_layout(gy).reshape(ne, -1),
                                   (gym @ U.reshape(ne, -1).T).T, atol=1e-12)

    def test_constant_field(self, rng):
        b = get_basis(5, 6)
        F = np.full((6, 3, 6), 2.75)
        v, gx, gy = kernels.vol_values_and_gradients(F, b)
        np.testing.assert_allclose(v, 2.75, atol=1e-13)
        np.testing.assert_allclose(gx, 0.0, atol=1e-12)
        np.testing.assert_allclose(gy, 0.0, atol=1e-12)

    def test_monomial_exact(self):
        # coefficients of x^3 * y^2 at the nodes reproduce point values
        k, nq = 4, 6
        b = get_basis(k, nq)
        X, Y = np.meshgrid(b.nodes, b.nodes)  # [y, x]
        U = (X**3 * Y**2)[None]
        v = kernels.vol_values(to_layout(U), b)
        Xq, Yq = np.meshgrid(b.rule.points, b.rule.points)
        np.testing.assert_allclose(from_layout(v)[0], Xq**3 * Yq**2, atol=1e-13)

    @pytest.mark.parametrize("k,nq", [(2, 3), (4, 5), (4, 7), (7, 8)])
    def test_integrate_is_adjoint(self, k, nq, rng):
        b = get_basis(k, nq)
        ne = 4
        U = rng.standard_normal((k + 1, ne, k + 1))
        Q = rng.standard_normal((nq, ne, nq))
        lhs = np.vdot(kernels.vol_values(U, b), Q)
        rhs = np.vdot(U, kernels.vol_integrate_values(Q, b))
        assert lhs == pytest.approx(rhs, rel=1e-13)
        Gx = rng.standard_normal((nq, ne, nq))
        Gy = rng.standard_normal((nq, ne, nq))
        gx, gy = kernels.vol_gradients(U, b)
        lhs = np.vdot(gx, Gx) + np.vdot(gy, Gy)
        rhs = np.vdot(U, kernels.vol_integrate_gradients(Gx, Gy, b))
        assert lhs == pytest.approx(rhs, rel=1e-13)

    def test_integrate_unit_data_gives_lagrange_integrals(self):
        # data = 1 with unit weights applied -> integral of each basis fn
        k, nq = 3, 4
        b = get_basis(k, nq)
        q = b.rule
        data = np.ones((nq, 1, nq)) * np.outer(q.weights, q.weights)[:, None, :]
        moments = kernels.vol_integrate_values(data, b)
        # oracle: analytic integral of l_i(x) l_j(y) via high-order quadrature
        fine = gauss_rule(12)
        V = lagrange_values(b.nodes, fine.points)
        ints_1d = fine.weights @ V
        np.testing.assert_allclose(from_layout(moments)[0],
                                   np.outer(ints_1d, ints_1d), atol=1e-13)


class TestInverseMass:
    @pytest.mark.parametrize("k", [1, 2, 4, 7])
    def test_inverse_composition(self, k, rng):
        b = get_basis(k, k + 1)
        ne = 5
        jxw = np.abs(rng.standard_normal((k + 1, ne, k + 1))) + 0.5
        U = rng.standard_normal((k + 1, ne, k + 1))
        R = kernels.apply_mass(U, b, jxw)
        U2 = kernels.apply_inverse_mass(R, b, jxw)
        np.testing.assert_allclose(U2, U, rtol=1e-12, atol=1e-12)

    def test_constant_projection(self, rng):
        # rhs = load vector of constant c -> nodal values all c
        k = 3
        b = get_basis(k, k + 1)
        jxw = np.abs(rng.standard_normal((k + 1, 2, k + 1))) + 0.5
        c = 3.25
        R = kernels.vol_integrate_values(c * jxw, b)
        U = kernels.apply_inverse_mass(R, b, jxw)
        np.testing.assert_allclose(U, c, atol=1e-12)

    def test_requires_collocated_rule(self):
        b = get_basis(3, 6)
        with pytest.raises(ValueError):
            kernels.apply_inverse_mass(np.zeros((4, 1, 4)), b, np.ones((6, 1, 6)))


class TestFaceKernels:
    def dense_trace_tables(self, b):
        """Naive face trace matrices (q, m*m) for the four slots."""
        m = b.k + 1
        lv, rv = b.left_value, b.right_value
        t0 = np.einsum("qi,j->qij", b.S, lv).reshape(b.n_q, m * m)   # x=-1
        t1 = np.einsum("qi,j->qij", b.S, rv).reshape(b.n_q, m * m)
        t2 = np.einsum("i,qj->qij", lv, b.S).reshape(b.n_q, m * m)   # y=-1
        t3 = np.einsum("i,qj->qij", rv, b.S).reshape(b.n_q, m * m)
        return [t0, t1, t2, t3]

    @pytest.mark.parametrize("k,nq", [(2, 3), (4, 5), (4, 7)])
    def test_value_traces_match_dense(self, k, nq, rng):
        b = get_basis(k, nq)
        ne = 3
        U = rng.standard_normal((ne, k + 1, k + 1))
        got = kernels.face_values(to_layout(U), b)
        for s, T in enumerate(self.dense_trace_tables(b)):
            np.testing.assert_allclose(got[s], (T @ U.reshape(ne, -1).T).T,
                                       atol=1e-13)

    def test_gradient_traces_match_dense(self, rng):
        k, nq, ne = 3, 4, 4
        b = get_basis(k, nq)
        m = k + 1
        U = rng.standard_normal((ne, m, m))
        gx, gy = kernels.face_gradients(to_layout(U), b)
        # dense: evaluate d/dxi and d/deta on each face line
        for s, (ty, tx) in enumerate([(b.S, None), (b.S, None), (None, b.S),
                                      (None, b.S)]):
            if s in (0, 1):
                erow = b.left_deriv if s == 0 else b.right_deriv
                evec = b.left_value if s == 0 else b.right_value
                TX = np.einsum("qi,j->qij", b.S, erow).reshape(nq, -1)
                TY = np.einsum("qi,j->qij", b.D, evec).reshape(nq, -1)
            else:
                erow = b.left_deriv if s == 2 else b.right_deriv
                evec = b.left_value if s == 2 else b.right_value
                TY = np.einsum("i,qj->qij", erow, b.S).reshape(nq, -1)
                TX = np.einsum("i,qj->qij", evec, b.D).reshape(nq, -1)
            np.testing.assert_allclose(gx[s], (TX @ U.reshape(ne, -1).T).T,
                                       atol=1e-12)
            np.testing.assert_allclose(gy[s], (TY @ U.reshape(ne, -1).T).T,
                                       atol=1e-12)

    def test_constant_trace(self):
        b = get_basis(4, 5)
        F = np.full((5, 2, 5), -1.5)
        tr = kernels.face_values(F, b)
        np.testing.assert_allclose(tr, -1.5, atol=1e-13)

    def test_lift_is_adjoint_of_trace(self, rng):
        k, nq, ne = 4, 5, 3
        b = get_basis(k, nq)
        U = rng.standard_normal((k + 1, ne, k + 1))
        V = rng.standard_normal((4, ne, nq))
        lhs = np.vdot(kernels.face_values(U, b), V)
        out = np.zeros_like(U)
        kernels.face_lift_values(V, b, out)
        assert np.vdot(U, out) == pytest.approx(lhs, rel=1e-13)

    def test_grad_lift_is_adjoint_of_grad_trace(self, rng):
        k, nq, ne = 3, 4, 5
        b = get_basis(k, nq)
        U = rng.standard_normal((k + 1, ne, k + 1))
        GX = rng.standard_normal((4, ne, nq))
        GY = rng.standard_normal((4, ne, nq))
        gx, gy = kernels.face_gradients(U, b)
        lhs = np.vdot(gx, GX) + np.vdot(gy, GY)
        out = np.zeros_like(U)
        kernels.face_lift_gradients(GX, GY, b, out)
        assert np.vdot(U, out) == pytest.approx(lhs, rel=1e-12)


def test_op_count_scaling():
    # multiplies of the volume kernels scale ~ (k+1)^(d+1), d = 2
    ne = 4
    counts = {}
    for k in (3, 7):
        b = get_basis(k, k + 1)
        F = np.ones((k + 1, ne, k + 1))
        kernels.enable_op_counting(True)
        kernels.vol_values_and_gradients(F, b)
        counts[k] = kernels.op_count()
        kernels.enable_op_counting(False)
    ratio = counts[7] / counts[3]
    expected = (8 / 4) ** 3
    assert 0.8 * expected <= ratio <= 1.2 * expected
