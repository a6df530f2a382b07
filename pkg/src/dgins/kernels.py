"""Sum-factorized tensor-product element kernels.

All kernels act on batches of elements at once. A scalar element field is
stored as an array of shape (m, ne, m) with axes (y-node, element, x-node),
so that both 1D contraction directions reduce to single contiguous GEMMs:

    x-direction:  F.reshape(m * ne, m) @ T.T
    y-direction:  T @ F.reshape(m, ne * q)

This evaluates values/gradients of all elements at tensor quadrature points
in O(d (k+1)^(d+1)) operations per element instead of the O((k+1)^(2d)) of
a naive dense application.

Face slots are numbered 0: x=-1, 1: x=+1, 2: y=-1, 3: y=+1; the face
parameter runs in the direction of increasing coordinate. Face traces
exploit that Gauss-Lobatto bases have a single nonzero value row at the
endpoints, so value traces touch only the (k+1) boundary nodes.

A debug operation counter (multiply count of the 1D passes) can be enabled
to assert the complexity claim in tests.
"""

import numpy as np

from .basis import Basis1D

_count_enabled = False
_mult_count = 0


def enable_op_counting(on: bool = True):
    global _count_enabled, _mult_count
    _count_enabled = on
    _mult_count = 0


def op_count() -> int:
    return _mult_count


def _count(n: int):
    global _mult_count
    if _count_enabled:
        _mult_count += n


def _contract_x(F: np.ndarray, T: np.ndarray) -> np.ndarray:
    """out[a, e, q] = sum_j F[a, e, j] T[q, j]."""
    a, ne, m = F.shape
    _count(a * ne * m * T.shape[0])
    return (F.reshape(a * ne, m) @ T.T).reshape(a, ne, T.shape[0])


def _contract_y(F: np.ndarray, T: np.ndarray) -> np.ndarray:
    """out[q, e, b] = sum_i T[q, i] F[i, e, b]."""
    m, ne, b = F.shape
    _count(m * ne * b * T.shape[0])
    return (T @ F.reshape(m, ne * b)).reshape(T.shape[0], ne, b)


def vol_values(F: np.ndarray, basis: Basis1D) -> np.ndarray:
    """Field values at tensor quadrature points, (m,ne,m) -> (q,ne,q)."""
    return _contract_y(_contract_x(F, basis.S), basis.S)


def vol_values_and_gradients(F: np.ndarray, basis: Basis1D):
    """Values and reference gradients (d/dxi, d/deta) at quadrature points."""
    tS = _contract_x(F, basis.S)
    vals = _contract_y(tS, basis.S)
    gy = _contract_y(tS, basis.D)
    gx = _contract_y(_contract_x(F, basis.D), basis.S)
    return vals, gx, gy


def vol_gradients(F: np.ndarray, basis: Basis1D):
    tS = _contract_x(F, basis.S)
    gy = _contract_y(tS, basis.D)
    gx = _contract_y(_contract_x(F, basis.D), basis.S)
    return gx, gy


def vol_integrate_values(Q: np.ndarray, basis: Basis1D) -> np.ndarray:
    """Adjoint of vol_values: quadrature data -> moment vector (m,ne,m)."""
    return _contract_y(_contract_x(Q, basis.S.T), basis.S.T)


def vol_integrate_gradients(Gx: np.ndarray, Gy: np.ndarray,
                            basis: Basis1D) -> np.ndarray:
    """Adjoint of vol_gradients; Gx tests d/dxi, Gy tests d/deta."""
    out = _contract_y(_contract_x(Gx, basis.D.T), basis.S.T)
    out += _contract_y(_contract_x(Gy, basis.S.T), basis.D.T)
    return out


def apply_inverse_mass(R: np.ndarray, basis: Basis1D,
                       jxw: np.ndarray) -> np.ndarray:
    """Exact inverse of the consistent mass matrix applied to moments R.

    Uses the factorization M = (S (x) S)^T diag(JxW) (S (x) S), valid when
    the bound rule has n_q = k + 1 points so S is square; works unchanged
    on curved elements where JxW varies per point.
    """
    if basis.S_inv is None:
        raise ValueError("inverse mass requires the n_q = k + 1 Gauss rule")
    Si = basis.S_inv
    Q = _contract_y(_contract_x(R, Si.T), Si.T)
    Q /= jxw
    return _contract_y(_contract_x(Q, Si), Si)


def apply_mass(F: np.ndarray, basis: Basis1D, jxw: np.ndarray) -> np.ndarray:
    """Consistent mass matrix action, same quadrature as the inverse."""
    return vol_integrate_values(vol_values(F, basis) * jxw, basis)


# ---------------------------------------------------------------------------
# face kernels

def face_values(F: np.ndarray, basis: Basis1D) -> np.ndarray:
    """Value traces on all four faces, -> (4, ne, q_f)."""
    m, ne, _ = F.shape
    q = basis.n_q
    S = basis.S
    out = np.empty((4, ne, q))
    _count(4 * ne * m * q)
    out[0] = (S @ F[:, :, 0]).T
    out[1] = (S @ F[:, :, -1]).T
    out[2] = F[0] @ S.T
    out[3] = F[-1] @ S.T
    return out


def face_gradients(F: np.ndarray, basis: Basis1D):
    """Reference-gradient traces on all four faces, -> (gx, gy), (4,ne,q)."""
    m, ne, _ = F.shape
    q = basis.n_q
    S, D = basis.S, basis.D
    ld, rd = basis.left_deriv, basis.right_deriv
    gx = np.empty((4, ne, q))
    gy = np.empty((4, ne, q))
    _count(8 * ne * m * q + 4 * ne * m * m)
    Fr = F.reshape(m * ne, m)
    dxl = (Fr @ ld).reshape(m, ne)   # d/dxi at x=-1, per y-node
    dxr = (Fr @ rd).reshape(m, ne)
    gx[0] = (S @ dxl).T
    gx[1] = (S @ dxr).T
    gy[0] = (D @ F[:, :, 0]).T
    gy[1] = (D @ F[:, :, -1]).T
    Fy = F.reshape(m, ne * m)
    dyb = (ld @ Fy).reshape(ne, m)   # d/deta at y=-1, per x-node
    dyt = (rd @ Fy).reshape(ne, m)
    gy[2] = dyb @ S.T
    gy[3] = dyt @ S.T
    gx[2] = F[0] @ D.T
    gx[3] = F[-1] @ D.T
    return gx, gy


def face_lift_values(V: np.ndarray, basis: Basis1D,
                     out: np.ndarray) -> np.ndarray:
    """Adjoint of face_values, accumulated into `out` of shape (m,ne,m)."""
    S = basis.S
    _count(4 * V.shape[1] * S.size)
    out[:, :, 0] += (V[0] @ S).T
    out[:, :, -1] += (V[1] @ S).T
    out[0] += V[2] @ S
    out[-1] += V[3] @ S
    return out


def face_lift_gradients(GX: np.ndarray, GY: np.ndarray, basis: Basis1D,
                        out: np.ndarray) -> np.ndarray:
    """Adjoint of face_gradients, accumulated into `out` of shape (m,ne,m)."""
    S, D = basis.S, basis.D
    ld, rd = basis.left_deriv, basis.right_deriv
    m, ne, _ = out.shape
    _count(8 * GX.shape[1] * S.size + 4 * ne * m * m)
    out += (GX[0] @ S).T[:, :, None] * ld[None, None, :]
    out += (GX[1] @ S).T[:, :, None] * rd[None, None, :]
    out[:, :, 0] += (GY[0] @ D).T
    out[:, :, -1] += (GY[1] @ D).T
    out += ld[:, None, None] * (GY[2] @ S)[None, :, :]
    out += rd[:, None, None] * (GY[3] @ S)[None, :, :]
    out[0] += GX[2] @ D
    out[-1] += GX[3] @ D
    return out
