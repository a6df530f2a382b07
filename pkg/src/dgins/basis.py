"""Nodal 1D Lagrange bases on Gauss-Lobatto points with bound quadrature tables.

A Basis1D holds the shape-value table S[q, i] = l_i(x_q) and derivative
table D[q, i] = l_i'(x_q) for one quadrature rule, the endpoint value and
derivative rows used for face integrals, and (for the n_q = k+1 Gauss rule)
the inverse of S needed by the tensorial inverse-mass kernel. Tables are
immutable after construction and cached per (degree, rule size).
"""

import numpy as np

from .quadrature import QuadratureRule, gauss_rule, gll_nodes


def lagrange_values(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Table V[q, i] = l_i(x[q]) for the Lagrange basis on `nodes`.

    Barycentric form; exact reproduction at the nodes themselves.
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    diff = nodes[None, :] - nodes[:, None]
    np.fill_diagonal(diff, 1.0)
    bweights = 1.0 / np.prod(diff, axis=1)
    v = np.empty((len(x), len(nodes)))
    for q, xq in enumerate(x):
        d = xq - nodes
        hit = np.isclose(d, 0.0, atol=1e-14)
        if hit.any():
            v[q] = 0.0
            v[q, np.argmax(hit)] = 1.0
        else:
            t = bweights / d
            v[q] = t / t.sum()
    return v


def lagrange_derivatives(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Table D[q, i] = l_i'(x[q]) via the differentiation matrix.

    Built from the exact nodal differentiation matrix and the value table,
    using l_i' = sum_j D_nodal[j, i] l_j (the derivative of a degree-k
    polynomial is represented exactly in the same basis).
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    diff = nodes[None, :] - nodes[:, None]
    np.fill_diagonal(diff, 1.0)
    bweights = 1.0 / np.prod(diff, axis=1)
    # nodal differentiation matrix: Dn[j, i] = l_i'(nodes[j])
    dn = np.empty((n, n))
    for j in range(n):
        for i in range(n):
            if i != j:
                dn[j, i] = bweights[i] / bweights[j] / (nodes[j] - nodes[i])
        dn[j, j] = 0.0
        dn[j, j] = -dn[j].sum()
    return lagrange_values(nodes, x) @ dn


class Basis1D:
    """Degree-k Lagrange basis on Gauss-Lobatto nodes bound to one rule."""

    def __init__(self, k: int, rule: QuadratureRule):
        self.k = k
        self.nodes = gll_nodes(k)
        self.rule = rule
        self.S = lagrange_values(self.nodes, rule.points)
        self.D = lagrange_derivatives(self.nodes, rule.points)
        # endpoint rows for face terms; with Gauss-Lobatto nodes the value
        # rows are unit vectors, kept explicit for clarity
        self.left_value = lagrange_values(self.nodes, np.array([-1.0]))[0]
        self.right_value = lagrange_values(self.nodes, np.array([1.0]))[0]
        self.left_deriv = lagrange_derivatives(self.nodes, np.array([-1.0]))[0]
        self.right_deriv = lagrange_derivatives(self.nodes, np.array([1.0]))[0]
        # S is square and invertible exactly when n_q = k + 1
        self.S_inv = np.linalg.inv(self.S) if rule.n == k + 1 else None
        for a in (self.S, self.D, self.left_value, self.right_value,
                  self.left_deriv, self.right_deriv, self.nodes):
            a.flags.writeable = False

    @property
    def n_q(self) -> int:
        return self.rule.n


_cache: dict = {}


def get_basis(k: int, n_q: int) -> Basis1D:
    """Cached Basis1D for degree k bound to the n_q-point Gauss rule."""
    key = (k, n_q)
    if key not in _cache:
        _cache[key] = Basis1D(k, gauss_rule(n_q))
    return _cache[key]


def linear_rule_points(k: int) -> int:
    """Quadrature size for linear (degree <= 2k) terms."""
    return k + 1


def convective_rule_points(k: int) -> int:
    """Over-integration size for the quadratic convective term."""
    return (3 * k) // 2 + 1
