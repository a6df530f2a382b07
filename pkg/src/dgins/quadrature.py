"""1D quadrature rules and Gauss-Lobatto node sets on [-1, 1].

Nodes are computed by Newton iteration on the defining polynomial
conditions, seeded with Chebyshev estimates, so the values are
reproducible to machine precision without tabulated constants.
"""

from dataclasses import dataclass

import numpy as np

_NEWTON_TOL = 1e-15
_NEWTON_MAXIT = 100


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights of a 1D rule on (-1, 1).

    Exact for polynomials of degree <= 2*n - 1 (Gauss-Legendre).
    """

    points: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.points)


def _legendre_eval(n: int, x: np.ndarray):
    """Evaluate P_n and P_n' by the three-term recurrence."""
    p0 = np.ones_like(x)
    if n == 0:
        return p0, np.zeros_like(x)
    p1 = x.copy()
    for j in range(1, n):
        p0, p1 = p1, ((2 * j + 1) * x * p1 - j * p0) / (j + 1)
    # derivative from P_n and P_{n-1}; endpoints get the analytic value
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = n * (x * p1 - p0) / (x * x - 1.0)
    at_end = np.abs(np.abs(x) - 1.0) < 1e-300
    if at_end.any():
        dp = np.where(at_end, np.sign(x) ** (n - 1) * n * (n + 1) / 2.0, dp)
    return p1, dp


def gauss_rule(n: int) -> QuadratureRule:
    """Gauss-Legendre rule with n points.

    Roots of P_n found by Newton iteration from Chebyshev initial
    guesses; weights w_i = 2 / ((1 - x_i^2) P_n'(x_i)^2).
    """
    if n < 1:
        raise ValueError(f"need at least one quadrature point, got n={n}")
    if n == 1:
        return QuadratureRule(np.array([0.0]), np.array([2.0]))
    x = -np.cos(np.pi * (np.arange(n) + 0.75) / (n + 0.5))
    for _ in range(_NEWTON_MAXIT):
        p, dp = _legendre_eval(n, x)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    # one polishing step and symmetrization
    p, dp = _legendre_eval(n, x)
    x -= p / dp
    x = 0.5 * (x - x[::-1])
    _, dp = _legendre_eval(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    return QuadratureRule(x, w)


def gll_nodes(k: int) -> np.ndarray:
    """Gauss-Lobatto nodes for a degree-k basis: +-1 plus roots of P_k'.

    Returns k + 1 nodes sorted ascending, symmetric about 0. The scheme
    requires k >= 1.
    """
    if k < 1:
        raise ValueError(f"polynomial degree must be >= 1, got k={k}")
    if k == 1:
        return np.array([-1.0, 1.0])
    # interior nodes: roots of P_k', Newton on dP with second derivative
    # from the Legendre ODE: (1-x^2) P'' = 2x P' - k(k+1) P
    x = -np.cos(np.pi * (np.arange(1, k) + 0.26) / k)  # Chebyshev-type seed
    for _ in range(_NEWTON_MAXIT):
        p, dp = _legendre_eval(k, x)
        ddp = (2 * x * dp - k * (k + 1) * p) / (1.0 - x * x)
        dx = dp / ddp
        x -= dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    x = 0.5 * (x - x[::-1])
    return np.concatenate(([-1.0], x, [1.0]))


def gll_rule(k: int) -> QuadratureRule:
    """Gauss-Lobatto rule on k+1 nodes, exact to degree 2k - 1."""
    x = gll_nodes(k)
    if k == 1:
        return QuadratureRule(x, np.array([1.0, 1.0]))
    p, _ = _legendre_eval(k, x)
    w = 2.0 / (k * (k + 1) * p * p)
    return QuadratureRule(x, w)
