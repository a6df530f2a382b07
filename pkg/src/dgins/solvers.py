"""Matrix-free Krylov solvers and smoothers.

All solvers operate on plain numpy arrays of arbitrary shape; operators and
preconditioners are callables. Convergence is measured in the
preconditioned residual norm sqrt(r . P^-1 r) against
max(rel_tol * initial, abs_tol). Reductions use single numpy dot products,
so results are deterministic for a fixed thread configuration.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels


@dataclass
class SolverStats:
    iterations: int
    residual: float
    converged: bool
    breakdown: bool = False


def _ident(x):
    return x.copy()


def pcg(op: Callable, prec: Optional[Callable], b: np.ndarray,
        x0: Optional[np.ndarray] = None, rel_tol: float = 1e-8,
        abs_tol: float = 0.0, max_iter: int = 1000):
    """Preconditioned conjugate gradients; returns (x, SolverStats).

    Nonpositive curvature aborts with the breakdown flag set (the operator
    is not SPD on the Krylov space). The preconditioner must be a fixed
    linear SPD operation for the iteration to be valid.
    """
    prec = prec or _ident
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = x0.copy()
        r = b - op(x)
    z = prec(r)
    rz = np.vdot(r, z).real
    if rz < 0:
        return x, SolverStats(0, np.sqrt(abs(rz)), False, breakdown=True)
    norm0 = np.sqrt(rz)
    tol = max(rel_tol * norm0, abs_tol)
    if norm0 <= tol:
        return x, SolverStats(0, norm0, True)
    p = z.copy()
    norm = norm0
    for it in range(1, max_iter + 1):
        Ap = op(p)
        pAp = np.vdot(p, Ap).real
        if pAp <= 0.0:
            return x, SolverStats(it, norm, False, breakdown=True)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = prec(r)
        rz_new = np.vdot(r, z).real
        norm = np.sqrt(max(rz_new, 0.0))
        if norm <= tol:
            return x, SolverStats(it, norm, True)
        if rz_new <= 0.0:
            return x, SolverStats(it, norm, False, breakdown=True)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolverStats(max_iter, norm, False)


@dataclass
class ChebyshevConfig:
    """Chebyshev smoother parameters: polynomial degree, the smoothing
    range (eigenvalue band [lambda_max/range, lambda_max]) and the
    lambda_max estimate of the Jacobi-preconditioned operator."""

    degree: int = 5
    smoothing_range: float = 20.0
    lambda_max: float = 1.0

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("Chebyshev degree must be >= 0")
        if self.smoothing_range <= 1.0:
            raise ValueError("smoothing range must exceed 1")


def chebyshev_smooth(op: Callable, diag: np.ndarray, cfg: ChebyshevConfig,
                     rhs: np.ndarray, x: Optional[np.ndarray] = None,
                     degree: Optional[int] = None) -> np.ndarray:
    """Chebyshev iteration damping the band [lmax/range, lmax].

    Linear in (rhs, x); performs `degree` operator applications for a
    nonzero initial guess (one fewer starting from zero). degree overrides
    the configured polynomial degree (used by the coarse solver).
    """
    deg = cfg.degree if degree is None else degree
    if x is None:
        x = np.zeros_like(rhs)
        r = rhs.copy()
        deg_eff = deg
    else:
        x = x.copy()
        if deg == 0:
            return x
        r = rhs - op(x)
        deg_eff = deg
    if deg == 0:
        return x
    lmax = cfg.lambda_max
    lmin = lmax / cfg.smoothing_range
    theta = 0.5 * (lmax + lmin)
    delta = 0.5 * (lmax - lmin)
    sigma1 = theta / delta
    rho = 1.0 / sigma1
    d = (r / diag) / theta
    x += d
    for _ in range(deg_eff - 1):
        r -= op(d)
        rho_new = 1.0 / (2.0 * sigma1 - rho)
        d = (rho_new * rho) * d + (2.0 * rho_new / delta) * (r / diag)
        rho = rho_new
        x += d
    return x


def chebyshev_error_factor(kappa: float, n: int) -> float:
    """Classic Chebyshev error bound 2 q^n with q = (sqrt(k)-1)/(sqrt(k)+1)."""
    q = (np.sqrt(kappa) - 1.0) / (np.sqrt(kappa) + 1.0)
    return 2.0 * q**n


def eigen_estimate_via_cg(op: Callable, prec_diag: Optional[np.ndarray],
                          b: np.ndarray, n_iter: int = 20):
    """Largest (and smallest) eigenvalue estimates of the
    Jacobi-preconditioned operator from the CG Lanczos tridiagonal."""
    diag = prec_diag if prec_diag is not None else np.ones_like(b)
    x = np.zeros_like(b)
    r = b.copy()
    z = r / diag
    rz = np.vdot(r, z).real
    alphas, betas = [], []
    p = z.copy()
    for _ in range(n_iter):
        Ap = op(p)
        pAp = np.vdot(p, Ap).real
        if pAp <= 0 or rz <= 0:
            break
        alpha = rz / pAp
        alphas.append(alpha)
        x += alpha * p
        r -= alpha * Ap
        z = r / diag
        rz_new = np.vdot(r, z).real
        if rz_new <= 1e-30 * rz or rz_new <= 0:
            break
        beta = rz_new / rz
        betas.append(beta)
        p = z + beta * p
        rz = rz_new
    if not alphas:
        return 1.0, 1.0
    n = len(alphas)
    T = np.zeros((n, n))
    T[0, 0] = 1.0 / alphas[0]
    for i in range(1, n):
        T[i, i] = 1.0 / alphas[i] + betas[i - 1] / alphas[i - 1]
        off = np.sqrt(betas[i - 1]) / alphas[i - 1]
        T[i, i - 1] = T[i - 1, i] = off
    ev = np.linalg.eigvalsh(T)
    return float(ev[-1]), float(max(ev[0], 1e-12 * ev[-1]))


def zero_mean_project(space, p: np.ndarray) -> np.ndarray:
    """Remove the L2-mean: the discrete constant pressure mode."""
    g = space.geom
    vals = kernels.vol_values(p, space.basis)
    mean = (vals * g.jxw).sum() / g.volumes.sum()
    return p - mean


def zero_mean_project_dual(space, b: np.ndarray) -> np.ndarray:
    """Consistency projection for load vectors of singular Poisson systems.

    Removes the component along the constant test function: the entry sum
    of a load vector is the integral of the underlying data (partition of
    unity), so the projected vector is orthogonal to the operator's
    nullspace. The companion of zero_mean_project on the dual side.
    """
    g = space.geom
    w = kernels.vol_integrate_values(np.ascontiguousarray(g.jxw),
                                     space.basis)
    return b - (b.sum() / g.volumes.sum()) * w


def element_local_pcg(op_local: Callable, prec_local: Callable,
                      b: np.ndarray, rel_tol: float = 1e-12,
                      max_iter: int = 200, floor_factor: float = 8.0):
    """Batched per-element CG on block-diagonal SPD systems.

    b has element axis 2 (layout (ncomp, m, ne, m)); every element iterates
    with its own coefficients and stops individually. The requested
    tolerance is clipped per element at the attainable-accuracy limit
    floor_factor * eps * lambda_max, with lambda_max of the preconditioned
    operator estimated on the fly from the CG (Lanczos) coefficients;
    with inverse-mass preconditioning the smallest eigenvalue is 1, so this
    is the condition number. Without the clip, strongly penalized systems
    (large div-div factors) burn iterations shrinking a recursive residual
    the true residual no longer follows. Returns (x, iteration count per
    element, converged flag per element).
    """
    ne = b.shape[2]

    def edot(u, v):
        return np.einsum("cien,cien->e", u, v)

    x = np.zeros_like(b)
    r = b.copy()
    z = prec_local(r)
    rz = edot(r, z)
    norm0 = np.sqrt(np.maximum(rz, 0.0))
    active = norm0 > rel_tol * norm0
    iters = np.zeros(ne, dtype=int)
    p = z.copy()
    eps = np.finfo(float).eps
    lan_max = np.ones(ne)
    alpha_prev = np.ones(ne)
    beta_prev = np.zeros(ne)
    for it in range(1, max_iter + 1):
        if not active.any():
            break
        Ap = op_local(p)
        pAp = edot(p, Ap)
        safe = np.where(active & (pAp > 0), pAp, 1.0)
        alpha = np.where(active, rz / safe, 1.0)
        # running Lanczos diagonal, a sharp lambda_max proxy
        lan_max = np.maximum(lan_max, 1.0 / alpha + beta_prev / alpha_prev)
        x += np.where(active, alpha, 0.0)[None, None, :, None] * p
        r -= np.where(active, alpha, 0.0)[None, None, :, None] * Ap
        z = prec_local(r)
        rz_new = edot(r, z)
        norm = np.sqrt(np.maximum(rz_new, 0.0))
        iters[active] = it
        tol = np.maximum(rel_tol, floor_factor * eps * lan_max) * norm0
        active = active & (norm > tol)
        beta = np.where(active, rz_new / np.where(rz > 0, rz, 1.0), 0.0)
        alpha_prev, beta_prev = alpha, beta
        p = z + beta[None, None, :, None] * p
        rz = rz_new
    converged = ~active
    return x, iters, converged
