"""Geometric multigrid V-cycle preconditioner for the pressure Poisson
operator.

The hierarchy coarsens the element mesh (same polynomial degree on every
level); level transfer is the tensorial polynomial embedding from mother to
child cells, restriction its transpose. Smoothing is a fixed-degree
Chebyshev iteration needing only the operator action and its diagonal;
eigenvalue estimates come from an initial CG (Lanczos) run per level with a
1.1 safety factor. The coarsest level is solved by a Chebyshev iteration
whose count is fixed up front from the classic error bound reaching 1e-3,
which keeps the whole V-cycle a linear operation (a requirement for use
inside an outer CG iteration).

Small coarse matrices are compiled to a dense block once per hierarchy
(still applied inside the same fixed-count Chebyshev iteration); this is a
pure speed measure for the Python implementation and changes nothing about
the preconditioner's action beyond roundoff.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import operators as ops
from .basis import lagrange_values
from .quadrature import gll_nodes
from .solvers import ChebyshevConfig, chebyshev_smooth, eigen_estimate_via_cg
from .spaces import DgSpace


class Transfer:
    """Polynomial embedding between a space and its refinement."""

    def __init__(self, coarse: DgSpace, fine: DgSpace):
        if fine.mesh.parent is None:
            raise ValueError("fine mesh lacks parent links; build the "
                             "hierarchy by refinement")
        k = fine.k
        nodes = gll_nodes(k)
        self.E = [lagrange_values(nodes, 0.5 * (nodes - 1.0)),
                  lagrange_values(nodes, 0.5 * (nodes + 1.0))]
        self.fine_ids = []
        self.parent_ids = []
        for qd in range(4):
            sel = np.where(fine.mesh.quadrant == qd)[0]
            self.fine_ids.append(sel)
            self.parent_ids.append(fine.mesh.parent[sel])
        self.shape_c = (k + 1, coarse.mesh.n_elements, k + 1)
        self.shape_f = (k + 1, fine.mesh.n_elements, k + 1)

    def prolong(self, xc: np.ndarray) -> np.ndarray:
        m = xc.shape[0]
        out = np.empty(self.shape_f)
        for qd in range(4):
            dx, dy = qd % 2, qd // 2
            P = np.ascontiguousarray(xc[:, self.parent_ids[qd], :])
            t = (P.reshape(-1, m) @ self.E[dx].T).reshape(m, -1, m)
            t = (self.E[dy] @ t.reshape(m, -1)).reshape(m, -1, m)
            out[:, self.fine_ids[qd], :] = t
        return out

    def restrict(self, xf: np.ndarray) -> np.ndarray:
        m = xf.shape[0]
        out = np.zeros(self.shape_c)
        for qd in range(4):
            dx, dy = qd % 2, qd // 2
            F = np.ascontiguousarray(xf[:, self.fine_ids[qd], :])
            t = (F.reshape(-1, m) @ self.E[dx]).reshape(m, -1, m)
            t = (self.E[dy].T @ t.reshape(m, -1)).reshape(m, -1, m)
            out[:, self.parent_ids[qd], :] += t
        return out


@dataclass
class MgLevel:
    space: DgSpace
    op: Callable
    diag: np.ndarray
    cheb: ChebyshevConfig
    coarse_iters: Optional[int] = None          # set on level 0
    coarse_range: Optional[float] = None
    dense_block: Optional[np.ndarray] = None    # compiled coarse matrix


class MultigridHierarchy:
    """Levels coarse (0) to fine (-1) plus the inter-level transfers."""

    def __init__(self, spaces, bc_spec, tau_scale: float = 1.0,
                 degree: int = 5, smoothing_range: float = 20.0,
                 coarse_tol: float = 1e-3, est_iters: int = 20,
                 safety: float = 1.1, seed: int = 987,
                 project: Optional[Callable] = None,
                 dense_coarse_limit: int = 4096):
        if len(spaces) < 1:
            raise ValueError("hierarchy needs at least one level")
        self.levels = []
        self.transfers = []
        rng = np.random.default_rng(seed)
        for lvl, space in enumerate(spaces):
            bcs = bc_spec.resolve(space)
            op = _laplace_op(space, bcs, tau_scale)
            diag = ops.laplace_diagonal(space, bcs, tau_scale)
            seed_vec = rng.standard_normal(diag.shape)
            est_op = op
            if project is not None:
                # keep the Lanczos run out of the nullspace on singular
                # (pure-Neumann) levels
                seed_vec = project(space, seed_vec)
                est_op = (lambda o, s: lambda p: project(s, o(p)))(op, space)
            lmax, lmin = eigen_estimate_via_cg(est_op, diag, seed_vec,
                                               est_iters)
            cheb = ChebyshevConfig(degree, smoothing_range, safety * lmax)
            level = MgLevel(space, op, diag, cheb)
            if lvl == 0:
                kappa = (safety * lmax) / max(lmin / safety, 1e-12 * lmax)
                q = (math.sqrt(kappa) - 1.0) / (math.sqrt(kappa) + 1.0)
                n = math.ceil(math.log(2.0 / coarse_tol) /
                              -math.log(max(q, 1e-12)))
                level.coarse_iters = max(n, 1)
                level.coarse_range = kappa
                ndof = diag.size
                if ndof <= dense_coarse_limit:
                    level.dense_block = _compile_dense(op, diag.shape)
            self.levels.append(level)
        for c, f in zip(self.levels[:-1], self.levels[1:]):
            self.transfers.append(Transfer(c.space, f.space))

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def vcycle(self, b: np.ndarray) -> np.ndarray:
        return self._cycle(b, self.n_levels - 1)

    def _cycle(self, b, lvl):
        level = self.levels[lvl]
        if lvl == 0:
            cfg = ChebyshevConfig(level.coarse_iters,
                                  max(level.coarse_range, 1.0 + 1e-8),
                                  level.cheb.lambda_max)
            if level.dense_block is not None:
                shape = b.shape
                A = level.dense_block

                def op(x):
                    return (A @ x.ravel()).reshape(shape)
            else:
                op = level.op
            return chebyshev_smooth(op, level.diag, cfg, b)
        x = chebyshev_smooth(level.op, level.diag, level.cheb, b)
        r = b - level.op(x)
        rc = self.transfers[lvl - 1].restrict(r)
        xc = self._cycle(rc, lvl - 1)
        x += self.transfers[lvl - 1].prolong(xc)
        return chebyshev_smooth(level.op, level.diag, level.cheb, b, x)


def _laplace_op(space, bcs, tau_scale):
    def op(p):
        return ops.apply_pressure_laplace(space, p, bcs, tau_scale)
    return op


def _compile_dense(op, shape):
    n = int(np.prod(shape))
    A = np.empty((n, n))
    e = np.zeros(shape)
    flat = e.ravel()
    for j in range(n):
        flat[j] = 1.0
        A[:, j] = op(e).ravel()
        flat[j] = 0.0
    return A
