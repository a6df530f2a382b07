"""Discrete space: mesh + degree + quadrature-bound bases + face indexing.

A DgSpace owns the precomputed data every operator needs: basis tables for
the linear (n_q = k+1) and over-integrated convective rules, geometry
caches per rule, the interior penalty parameter, and flat index arrays for
gathering/scattering face data. Field storage follows the kernel layout
(components, y-node, element, x-node); FieldVector is the thin metadata
wrapper used at API boundaries.
"""

import numpy as np

from .basis import convective_rule_points, get_basis
from .geometry import Geometry, compute_tau_ip
from .mesh import Mesh


class FieldVector:
    """DoF storage for one field (velocity: 2 components, pressure: 1).

    Internally arrays are (ncomp, k+1, ne, k+1); `element_major` exposes
    the serialization layout (component, element, y-node, x-node) used by
    dumps and the dense reference assembly.
    """

    def __init__(self, data: np.ndarray, k: int):
        self.data = data
        self.k = k

    @classmethod
    def zeros(cls, space: "DgSpace", ncomp: int) -> "FieldVector":
        m = space.k + 1
        return cls(np.zeros((ncomp, m, space.mesh.n_elements, m)), space.k)

    @property
    def ncomp(self) -> int:
        return self.data.shape[0]

    @property
    def n_elements(self) -> int:
        return self.data.shape[2]

    def copy(self) -> "FieldVector":
        return FieldVector(self.data.copy(), self.k)

    def has_nan(self) -> bool:
        return bool(np.isnan(self.data).any())

    def element_major(self) -> np.ndarray:
        """Flat vector ordered (component, element, y-node, x-node)."""
        return np.ascontiguousarray(self.data.transpose(0, 2, 1, 3)).ravel()

    @classmethod
    def from_element_major(cls, flat: np.ndarray, space: "DgSpace",
                           ncomp: int) -> "FieldVector":
        m = space.k + 1
        a = flat.reshape(ncomp, space.mesh.n_elements, m, m)
        return cls(np.ascontiguousarray(a.transpose(0, 2, 1, 3)), space.k)


class DgSpace:
    def __init__(self, mesh: Mesh, k: int):
        if k < 1:
            raise ValueError(f"polynomial degree must be >= 1, got k={k}")
        self.mesh = mesh
        self.k = k
        self.basis = get_basis(k, k + 1)
        self.geom = Geometry(mesh, k + 1)
        self.tau_e, self.tau_if, self.tau_bf = compute_tau_ip(mesh, self.geom, k)
        self._over = None
        self._error = None
        f = mesh.interior
        self.f_em, self.f_sm = f.em, f.sm
        self.f_ep, self.f_sp = f.ep, f.sp
        self.f_flip = f.flip
        b = mesh.boundary
        self.b_groups = {}
        for i, name in enumerate(mesh.tag_names):
            sel = b.tag == i
            if sel.any():
                self.b_groups[name] = (b.elem[sel], b.slot[sel])

    @property
    def n_local(self) -> int:
        return (self.k + 1) ** 2

    def node_coords(self) -> np.ndarray:
        """Physical coordinates of the field nodes, (2, m, ne, m).

        Used to interpolate initial conditions and analytic solutions; on
        conforming meshes shared face nodes coincide from both sides, so
        interpolants of continuous functions are continuous.
        """
        if not hasattr(self, "_node_coords"):
            from . import kernels
            from .basis import lagrange_values, get_basis
            gb = get_basis(self.mesh.geom_degree, 2)
            T = lagrange_values(gb.nodes, get_basis(self.k, 2).nodes)

            class _Tab:
                S = T
            xs = kernels._contract_y(
                kernels._contract_x(self.mesh.geom_nodes[0], T), T)
            ys = kernels._contract_y(
                kernels._contract_x(self.mesh.geom_nodes[1], T), T)
            self._node_coords = np.stack([xs, ys])
        return self._node_coords

    def interpolate(self, fn, t: float, ncomp: int) -> np.ndarray:
        """Nodal interpolant of fn(x, t); fn maps (2, ...) -> (ncomp, ...)."""
        x = self.node_coords()
        vals = fn(x, t)
        if ncomp == 1 and np.asarray(vals).shape != (1,) + x.shape[1:]:
            vals = np.asarray(vals)[None]
        return np.ascontiguousarray(np.asarray(vals, dtype=float))

    @property
    def basis_over(self):
        if self._over is None:
            self._over = (get_basis(self.k, convective_rule_points(self.k)),
                          Geometry(self.mesh, convective_rule_points(self.k)))
        return self._over

    @property
    def basis_error(self):
        """Over-integrated rule (n_q = k+2) for error norms."""
        if self._error is None:
            self._error = (get_basis(self.k, self.k + 2),
                           Geometry(self.mesh, self.k + 2))
        return self._error

    def velocity(self) -> FieldVector:
        return FieldVector.zeros(self, 2)

    def pressure(self) -> FieldVector:
        return FieldVector.zeros(self, 1)

    # --- face gather/scatter helpers (interior faces) ---

    def gather_minus(self, A4: np.ndarray) -> np.ndarray:
        """(4, ne, q) per-slot data -> (nf, q) on the minus side."""
        return A4[self.f_sm, self.f_em]

    def gather_plus(self, A4: np.ndarray) -> np.ndarray:
        """Plus-side data reordered to match minus-side quadrature points."""
        B = A4[self.f_sp, self.f_ep]
        fl = self.f_flip
        B[fl] = B[fl, ::-1]
        return B

    def scatter_faces(self, Vm: np.ndarray, Vp: np.ndarray,
                      out4: np.ndarray):
        """Write per-face data back to (4, ne, q) slot containers.

        Vp is given in minus-side ordering and flipped back here. Each
        (slot, element) pair receives from exactly one face, so plain
        assignment is race-free and deterministic.
        """
        out4[self.f_sm, self.f_em] = Vm
        fl = self.f_flip
        Vp = Vp.copy()
        Vp[fl] = Vp[fl, ::-1]
        out4[self.f_sp, self.f_ep] = Vp
