"""Mapped geometry data at quadrature points, plus the interior penalty
parameter.

A Geometry instance binds one mesh to one quadrature rule and precomputes
everything the matrix-free operators need: physical coordinates, JxW and
inverse-transpose Jacobians in the volume, and coordinates, outward unit
normals, surface JxW and inverse-transpose Jacobians on all four faces of
every element. Arrays follow the kernel layout; jinvT[a][b] stores
d xi_b / d x_a so that a physical gradient is

    g_phys[a] = sum_b jinvT[a][b] * g_ref[b].

Face normals are computed by Nanson's formula from the mapping Jacobian
evaluated on the face, so curved (iso-parametric) boundaries are handled
exactly like affine ones. All arrays are immutable after construction.
"""

import numpy as np

from . import kernels
from .basis import get_basis
from .mesh import Mesh

# reference outward normals per slot
_REF_NORMALS = ((-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0))


class Geometry:
    def __init__(self, mesh: Mesh, n_q: int):
        self.mesh = mesh
        self.n_q = n_q
        gb = get_basis(mesh.geom_degree, n_q)
        w = gb.rule.weights
        ne = mesh.n_elements

        # volume data
        xs, dxdxi, dxdeta = kernels.vol_values_and_gradients(
            mesh.geom_nodes[0], gb)
        ys, dydxi, dydeta = kernels.vol_values_and_gradients(
            mesh.geom_nodes[1], gb)
        det = dxdxi * dydeta - dxdeta * dydxi
        if not (det > 0).all():
            bad = int(np.argwhere((det <= 0).any(axis=(0, 2)))[0])
            raise ValueError(
                f"non-positive mapping Jacobian in element {bad}")
        self.xq = np.stack([xs, ys])                       # (2, q, ne, q)
        self.jxw = det * np.multiply.outer(w, w)[:, None, :]
        self.jinvT = np.empty((2, 2) + det.shape)
        self.jinvT[0, 0] = dydeta / det
        self.jinvT[0, 1] = -dydxi / det
        self.jinvT[1, 0] = -dxdeta / det
        self.jinvT[1, 1] = dxdxi / det
        self.volumes = self.jxw.sum(axis=(0, 2))           # (ne,)

        # face data, all four slots of every element
        fx = kernels.face_values(mesh.geom_nodes[0], gb)   # (4, ne, q)
        fy = kernels.face_values(mesh.geom_nodes[1], gb)
        gxx, gxy = kernels.face_gradients(mesh.geom_nodes[0], gb)
        gyx, gyy = kernels.face_gradients(mesh.geom_nodes[1], gb)
        fdet = gxx * gyy - gxy * gyx
        if not (fdet > 0).all():
            bad = int(np.argwhere((fdet <= 0).any(axis=(0, 2)))[0])
            raise ValueError(
                f"non-positive mapping Jacobian on a face of element {bad}")
        self.xf = np.stack([fx, fy])                       # (2, 4, ne, q)
        jit = np.empty((2, 2) + fdet.shape)
        jit[0, 0] = gyy / fdet
        jit[0, 1] = -gyx / fdet
        jit[1, 0] = -gxy / fdet
        jit[1, 1] = gxx / fdet
        self.jinvT_f = jit
        normal = np.empty((2, 4, ne, n_q))
        sjxw = np.empty((4, ne, n_q))
        for s, nref in enumerate(_REF_NORMALS):
            v0 = jit[0, 0, s] * nref[0] + jit[0, 1, s] * nref[1]
            v1 = jit[1, 0, s] * nref[0] + jit[1, 1, s] * nref[1]
            norm = np.hypot(v0, v1)
            normal[0, s] = v0 / norm
            normal[1, s] = v1 / norm
            sjxw[s] = fdet[s] * norm * w[None, :]
        self.normal = normal
        self.sjxw = sjxw
        self.face_areas = sjxw.sum(axis=2)                 # (4, ne)

        for a in (self.xq, self.jxw, self.jinvT, self.xf, self.jinvT_f,
                  self.normal, self.sjxw):
            a.flags.writeable = False


def compute_tau_ip(mesh: Mesh, geom: Geometry, k: int):
    """Interior penalty parameter per element and resolved per face.

    tau_e = (k+1)^2 (A_interior/2 + A_boundary) / V_e; interior faces take
    the maximum of the two adjacent element values, boundary faces their
    own element's value. Periodic faces count as interior.
    """
    ne = mesh.n_elements
    a_int = np.zeros(ne)
    a_bnd = np.zeros(ne)
    f = mesh.interior
    np.add.at(a_int, f.em, geom.face_areas[f.sm, f.em])
    np.add.at(a_int, f.ep, geom.face_areas[f.sp, f.ep])
    b = mesh.boundary
    np.add.at(a_bnd, b.elem, geom.face_areas[b.slot, b.elem])
    tau_e = (k + 1) ** 2 * (0.5 * a_int + a_bnd) / geom.volumes
    tau_iface = np.maximum(tau_e[f.em], tau_e[f.ep])
    tau_bface = tau_e[b.elem]
    return tau_e, tau_iface, tau_bface
