"""Matrix-free spatial operators of the splitting scheme.

Everything here acts on raw field arrays in the kernel layout: pressure
(m, ne, m), velocity (2, m, ne, m) with m = k + 1. Operator actions are
homogeneous (boundary data enters only right-hand sides), which keeps the
linear solves symmetric positive (semi)definite.

Variant routing: the divergence form a(q, u) and pressure-gradient form
b(v, p) exist in a volume-only ("standard") and a partially integrated
("weak", central flux) version; the strong rewrite of the weak divergence
form is also provided because the two must agree for arbitrary
discontinuous fields. Boundary faces use the one-sided conventions
{{phi}} = phi^-, [phi] = 0 for both Dirichlet and Neumann kinds, so the
jump penalty has no boundary term.

The local Lax-Friedrichs stabilization Lambda = max(2|u^- . n|, 2|u^+ . n|)
is evaluated per quadrature point; Dirichlet faces use the mirror state
2 g - u^-, which reproduces the one-sided flux formulas exactly.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .spaces import DgSpace

VARIANTS = ("VHW", "V1", "V2", "V3a", "V3b", "V3c", "V4")


@dataclass
class VariantConfig:
    """Stabilization variant selector and penalty factors.

    zeta_d_star / zeta_c_star are the dimensionless penalty factors; the
    effective factors divide by the CFL number. dt_ref is the reference
    time step of the rescaled-penalty variant V1 and must be positive
    there.
    """

    variant: str = "V3c"
    zeta_d_star: float = 1.0
    zeta_c_star: float = 1.0
    dt_ref: Optional[float] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.zeta_d_star < 0 or self.zeta_c_star < 0:
            raise ValueError("penalty factors must be >= 0")
        if self.variant == "V1" and not (self.dt_ref and self.dt_ref > 0):
            raise ValueError("V1 needs a positive reference time step dt_ref")

    @property
    def uses_divdiv(self) -> bool:
        return self.variant in ("V3a", "V3b", "V3c", "V4")

    @property
    def uses_jump(self) -> bool:
        return self.variant == "V4"

    @property
    def a_form(self) -> str:
        return "weak" if self.variant in ("V3b", "V3c") else "standard"

    @property
    def b_form(self) -> str:
        return "weak" if self.variant == "V3c" else "standard"

    @property
    def local_projection(self) -> bool:
        """Element-local projection solve (no face coupling)."""
        return not self.uses_jump


@dataclass
class DirichletBC:
    """Velocity Dirichlet data; g(x, t) -> (2, ...) for x of shape (2, ...).

    dg_dt is the time derivative of g, needed by the consistent pressure
    boundary condition; omit it only if the data is steady.
    """

    g: Callable
    dg_dt: Optional[Callable] = None


@dataclass
class NeumannBC:
    """Open-boundary data: viscous traction h(x, t) and pressure g_p(x, t)."""

    h: Callable
    g_p: Callable


class BoundarySpec:
    """tag -> boundary kind; validated against the mesh's boundary tags."""

    def __init__(self, kinds: dict):
        self.kinds = dict(kinds)

    def validate(self, mesh):
        present = {mesh.tag_names[t] for t in mesh.boundary.tag}
        missing = present - set(self.kinds)
        if missing:
            raise ValueError(f"boundary tags without a condition: {missing}")

    def resolve(self, space: DgSpace) -> "ResolvedBCs":
        return ResolvedBCs(space, self)


class ResolvedBCs:
    """Boundary groups of one space: (elements, slots, data functions)."""

    def __init__(self, space: DgSpace, spec: BoundarySpec):
        spec.validate(space.mesh)
        self.dirichlet = []
        self.neumann = []
        for tag, (eb, sb) in space.b_groups.items():
            kind = spec.kinds[tag]
            if isinstance(kind, DirichletBC):
                self.dirichlet.append((eb, sb, kind))
            elif isinstance(kind, NeumannBC):
                self.neumann.append((eb, sb, kind))
            else:
                raise TypeError(f"unsupported boundary kind for tag {tag!r}")

    @property
    def has_outflow(self) -> bool:
        return len(self.neumann) > 0


# ---------------------------------------------------------------------------
# small helpers

def _phys_grad_vol(g, gx, gy):
    px = g.jinvT[0, 0] * gx + g.jinvT[0, 1] * gy
    py = g.jinvT[1, 0] * gx + g.jinvT[1, 1] * gy
    return px, py


def _ref_test_vol(g, dx, dy):
    """Physical gradient-test data -> reference test data."""
    rx = g.jinvT[0, 0] * dx + g.jinvT[1, 0] * dy
    ry = g.jinvT[0, 1] * dx + g.jinvT[1, 1] * dy
    return rx, ry


def _phys_grad_face(g, gx, gy):
    px = g.jinvT_f[0, 0] * gx + g.jinvT_f[0, 1] * gy
    py = g.jinvT_f[1, 0] * gx + g.jinvT_f[1, 1] * gy
    return px, py


def _ref_test_face(g, dx, dy):
    rx = g.jinvT_f[0, 0] * dx + g.jinvT_f[1, 0] * dy
    ry = g.jinvT_f[0, 1] * dx + g.jinvT_f[1, 1] * dy
    return rx, ry


def _face_containers(space, n, q):
    ne = space.mesh.n_elements
    return [np.zeros((4, ne, q)) for _ in range(n)]


def mass_apply(space, u):
    """Consistent mass matrix on a (..., m, ne, m) field, per component."""
    b, g = space.basis, space.geom
    if u.ndim == 3:
        return kernels.apply_mass(u, b, g.jxw)
    return np.stack([kernels.apply_mass(u[c], b, g.jxw)
                     for c in range(u.shape[0])])


def inverse_mass_apply(space, r):
    b, g = space.basis, space.geom
    if r.ndim == 3:
        return kernels.apply_inverse_mass(r, b, g.jxw)
    return np.stack([kernels.apply_inverse_mass(r[c], b, g.jxw)
                     for c in range(r.shape[0])])


# ---------------------------------------------------------------------------
# SIP pressure Laplacian

def apply_pressure_laplace(space: DgSpace, p: np.ndarray, bcs: ResolvedBCs,
                           tau_scale: float = 1.0) -> np.ndarray:
    """Action of the symmetric interior penalty Laplacian on the pressure.

    Boundary mapping: velocity-Dirichlet faces are pressure-Neumann (no
    homogeneous term); velocity-Neumann faces are pressure-Dirichlet.
    tau_scale multiplies the penalty parameter (the small-time-step
    rescaling of V1).
    """
    b, g = space.basis, space.geom
    q = b.n_q
    vals, gx, gy = kernels.vol_values_and_gradients(p, b)
    px, py = _phys_grad_vol(g, gx, gy)
    rx, ry = _ref_test_vol(g, px * g.jxw, py * g.jxw)
    out = kernels.vol_integrate_gradients(rx, ry, b)

    fv = kernels.face_values(p, b)
    fgx, fgy = kernels.face_gradients(p, b)
    pxf, pyf = _phys_grad_face(g, fgx, fgy)
    gn = g.normal[0] * pxf + g.normal[1] * pyf

    Vc, Dx, Dy = _face_containers(space, 3, q)
    # interior faces
    sj = g.sjxw[space.f_sm, space.f_em]
    nx = g.normal[0, space.f_sm, space.f_em]
    ny = g.normal[1, space.f_sm, space.f_em]
    vm = space.gather_minus(fv)
    vp = space.gather_plus(fv)
    gnm = space.gather_minus(gn)
    gnp = space.gather_plus(gn)
    tau = tau_scale * space.tau_if[:, None]
    jump = vm - vp
    avg_gn = 0.5 * (gnm - gnp)          # {{grad p}} . n^-
    Vm = -(avg_gn - tau * jump) * sj
    space.scatter_faces(Vm, -Vm, Vc)
    Gx = -0.5 * jump * nx * sj          # same physical data on both sides
    Gy = -0.5 * jump * ny * sj
    space.scatter_faces(Gx, Gx, Dx)
    space.scatter_faces(Gy, Gy, Dy)
    # pressure-Dirichlet (velocity outflow) faces
    for eb, sb, _ in bcs.neumann:
        sjb = g.sjxw[sb, eb]
        vb = fv[sb, eb]
        taub = tau_scale * space.tau_e[eb][:, None]
        Vc[sb, eb] = -(gn[sb, eb] - 2.0 * taub * vb) * sjb
        Dx[sb, eb] = -vb * g.normal[0, sb, eb] * sjb
        Dy[sb, eb] = -vb * g.normal[1, sb, eb] * sjb

    rxf, ryf = _ref_test_face(g, Dx, Dy)
    kernels.face_lift_values(Vc, b, out)
    kernels.face_lift_gradients(rxf, ryf, b, out)
    return out


def gp_dirichlet_rhs(space: DgSpace, bcs: ResolvedBCs, t: float,
                     tau_scale: float = 1.0) -> np.ndarray:
    """Pressure-Dirichlet data (g_p on outflow) for the Poisson right side."""
    b, g = space.basis, space.geom
    q = b.n_q
    Vc, Dx, Dy = _face_containers(space, 3, q)
    for eb, sb, bc in bcs.neumann:
        x = g.xf[:, sb, eb]
        gp = bc.g_p(x, t)
        sjb = g.sjxw[sb, eb]
        taub = tau_scale * space.tau_e[eb][:, None]
        Vc[sb, eb] = 2.0 * taub * gp * sjb
        Dx[sb, eb] = -gp * g.normal[0, sb, eb] * sjb
        Dy[sb, eb] = -gp * g.normal[1, sb, eb] * sjb
    out = np.zeros((space.k + 1, space.mesh.n_elements, space.k + 1))
    rxf, ryf = _ref_test_face(g, Dx, Dy)
    kernels.face_lift_values(Vc, b, out)
    kernels.face_lift_gradients(rxf, ryf, b, out)
    return out


# ---------------------------------------------------------------------------
# divergence right-hand side a(q, u)

def eval_divergence_rhs(space: DgSpace, u: np.ndarray, bcs: ResolvedBCs,
                        scale: float, form: str = "standard") -> np.ndarray:
    """a(q_h, u_h) scaled: 'standard' volume form, partially integrated
    'weak' form with central flux, or its 'strong' rewrite."""
    b, g = space.basis, space.geom
    q = b.n_q
    if form == "standard":
        _, g0x, g0y = kernels.vol_values_and_gradients(u[0], b)
        _, g1x, g1y = kernels.vol_values_and_gradients(u[1], b)
        p0x, _ = _phys_grad_vol(g, g0x, g0y)
        _, p1y = _phys_grad_vol(g, g1x, g1y)
        data = -scale * (p0x + p1y) * g.jxw
        return kernels.vol_integrate_values(data, b)

    if form not in ("weak", "strong"):
        raise ValueError(f"unknown divergence form {form!r}")

    f0 = kernels.face_values(u[0], b)
    f1 = kernels.face_values(u[1], b)
    un = g.normal[0] * f0 + g.normal[1] * f1          # u^- . n on all faces
    Vc, = _face_containers(space, 1, q)
    sj = g.sjxw[space.f_sm, space.f_em]
    unm = space.gather_minus(un)
    unp = space.gather_plus(un)                        # u^+ . n^+ reordered

    if form == "weak":
        vals0 = kernels.vol_values(u[0], b)
        vals1 = kernels.vol_values(u[1], b)
        dx = scale * vals0 * g.jxw
        dy = scale * vals1 * g.jxw
        rx, ry = _ref_test_vol(g, dx, dy)
        out = kernels.vol_integrate_gradients(rx, ry, b)
        avg_un = 0.5 * (unm - unp)                     # {{u}} . n^-
        Vm = -scale * avg_un * sj
        space.scatter_faces(Vm, -Vm, Vc)
        for groups in (bcs.dirichlet, bcs.neumann):
            for eb, sb, _ in groups:
                Vc[sb, eb] = -scale * un[sb, eb] * g.sjxw[sb, eb]
        kernels.face_lift_values(Vc, b, out)
        return out

    # strong form: volume divergence plus half-jump face correction
    _, g0x, g0y = kernels.vol_values_and_gradients(u[0], b)
    _, g1x, g1y = kernels.vol_values_and_gradients(u[1], b)
    p0x, _ = _phys_grad_vol(g, g0x, g0y)
    _, p1y = _phys_grad_vol(g, g1x, g1y)
    out = kernels.vol_integrate_values(-scale * (p0x + p1y) * g.jxw, b)
    jump_un = unm + unp                                # [u] . n^- both sides
    Vm = scale * 0.5 * jump_un * sj
    space.scatter_faces(Vm, Vm, Vc)
    kernels.face_lift_values(Vc, b, out)
    return out


# ---------------------------------------------------------------------------
# pressure gradient right-hand side b(v, p)

def eval_pressure_gradient_rhs(space: DgSpace, p: np.ndarray,
                               bcs: ResolvedBCs, scale: float,
                               form: str = "standard") -> np.ndarray:
    """b(v_h, p_h) scaled; note b enters the projection with its own sign:
    standard form is -(v, scale * grad p)."""
    b, g = space.basis, space.geom
    q = b.n_q
    if form == "standard":
        _, gx, gy = kernels.vol_values_and_gradients(p, b)
        px, py = _phys_grad_vol(g, gx, gy)
        out = np.empty((2, space.k + 1, space.mesh.n_elements, space.k + 1))
        out[0] = kernels.vol_integrate_values(-scale * px * g.jxw, b)
        out[1] = kernels.vol_integrate_values(-scale * py * g.jxw, b)
        return out
    if form != "weak":
        raise ValueError(f"unknown pressure-gradient form {form!r}")

    vals = kernels.vol_values(p, b)
    s = scale * vals * g.jxw
    out = np.empty((2, space.k + 1, space.mesh.n_elements, space.k + 1))
    rx, ry = _ref_test_vol(g, s, np.zeros_like(s))
    out[0] = kernels.vol_integrate_gradients(rx, ry, b)
    rx, ry = _ref_test_vol(g, np.zeros_like(s), s)
    out[1] = kernels.vol_integrate_gradients(rx, ry, b)

    fv = kernels.face_values(p, b)
    V0, V1 = _face_containers(space, 2, q)
    sj = g.sjxw[space.f_sm, space.f_em]
    nx = g.normal[0, space.f_sm, space.f_em]
    ny = g.normal[1, space.f_sm, space.f_em]
    pm = space.gather_minus(fv)
    pp = space.gather_plus(fv)
    avg = 0.5 * (pm + pp)
    Vm0 = -scale * avg * nx * sj
    Vm1 = -scale * avg * ny * sj
    space.scatter_faces(Vm0, -Vm0, V0)
    space.scatter_faces(Vm1, -Vm1, V1)
    for groups in (bcs.dirichlet, bcs.neumann):
        for eb, sb, _ in groups:
            sjb = g.sjxw[sb, eb]
            V0[sb, eb] = -scale * fv[sb, eb] * g.normal[0, sb, eb] * sjb
            V1[sb, eb] = -scale * fv[sb, eb] * g.normal[1, sb, eb] * sjb
    kernels.face_lift_values(V0, b, out[0])
    kernels.face_lift_values(V1, b, out[1])
    return out


# ---------------------------------------------------------------------------
# projection operator M + tau_D D + tau_C C

def apply_projection_operator(space: DgSpace, w: np.ndarray,
                              tau_d_e: Optional[np.ndarray],
                              tau_c_f: Optional[np.ndarray]) -> np.ndarray:
    """SPD projection system action on a velocity field.

    tau_d_e: per-element div-div penalty (or None); tau_c_f: per interior
    face jump penalty (or None). The jump penalty has no boundary term.
    """
    b, g = space.basis, space.geom
    q = b.n_q
    out = np.empty_like(w)
    if tau_d_e is None:
        out[0] = kernels.apply_mass(w[0], b, g.jxw)
        out[1] = kernels.apply_mass(w[1], b, g.jxw)
    else:
        v0, g0x, g0y = kernels.vol_values_and_gradients(w[0], b)
        v1, g1x, g1y = kernels.vol_values_and_gradients(w[1], b)
        p0x, _ = _phys_grad_vol(g, g0x, g0y)
        _, p1y = _phys_grad_vol(g, g1x, g1y)
        s = (tau_d_e[None, :, None] * (p0x + p1y)) * g.jxw
        out[0] = kernels.vol_integrate_values(v0 * g.jxw, b)
        out[1] = kernels.vol_integrate_values(v1 * g.jxw, b)
        rx, ry = _ref_test_vol(g, s, np.zeros_like(s))
        out[0] += kernels.vol_integrate_gradients(rx, ry, b)
        rx, ry = _ref_test_vol(g, np.zeros_like(s), s)
        out[1] += kernels.vol_integrate_gradients(rx, ry, b)
    if tau_c_f is not None:
        f0 = kernels.face_values(w[0], b)
        f1 = kernels.face_values(w[1], b)
        V0, V1 = _face_containers(space, 2, q)
        sj = g.sjxw[space.f_sm, space.f_em]
        tc = tau_c_f[:, None]
        j0 = space.gather_minus(f0) - space.gather_plus(f0)
        j1 = space.gather_minus(f1) - space.gather_plus(f1)
        Vm0 = tc * j0 * sj
        Vm1 = tc * j1 * sj
        space.scatter_faces(Vm0, -Vm0, V0)
        space.scatter_faces(Vm1, -Vm1, V1)
        kernels.face_lift_values(V0, b, out[0])
        kernels.face_lift_values(V1, b, out[1])
    return out


# ---------------------------------------------------------------------------
# viscous Helmholtz operator

def apply_viscous_helmholtz(space: DgSpace, u: np.ndarray, gamma0_dt: float,
                            nu: float, bcs: ResolvedBCs) -> np.ndarray:
    """(gamma0/dt) M u + SIP discretization of -div(2 nu eps(u)), SPD."""
    b, g = space.basis, space.geom
    q = b.n_q
    v0, g0x, g0y = kernels.vol_values_and_gradients(u[0], b)
    v1, g1x, g1y = kernels.vol_values_and_gradients(u[1], b)
    u0x, u0y = _phys_grad_vol(g, g0x, g0y)
    u1x, u1y = _phys_grad_vol(g, g1x, g1y)
    e01 = nu * (u0y + u1x)                  # 2 nu eps_01
    t00 = (2.0 * nu * u0x) * g.jxw
    t01 = e01 * g.jxw
    t11 = (2.0 * nu * u1y) * g.jxw
    out = np.empty_like(u)
    rx, ry = _ref_test_vol(g, t00, t01)
    out[0] = kernels.vol_integrate_gradients(rx, ry, b)
    rx, ry = _ref_test_vol(g, t01, t11)
    out[1] = kernels.vol_integrate_gradients(rx, ry, b)
    out[0] += kernels.vol_integrate_values(gamma0_dt * v0 * g.jxw, b)
    out[1] += kernels.vol_integrate_values(gamma0_dt * v1 * g.jxw, b)
    if nu == 0.0:
        return out

    f0 = kernels.face_values(u[0], b)
    f1 = kernels.face_values(u[1], b)
    f0x, f0y = kernels.face_gradients(u[0], b)
    f1x, f1y = kernels.face_gradients(u[1], b)
    p0x, p0y = _phys_grad_face(g, f0x, f0y)
    p1x, p1y = _phys_grad_face(g, f1x, f1y)
    nx_a, ny_a = g.normal[0], g.normal[1]
    # (2 nu eps(u) . n) per component on all faces
    visc_n0 = nu * (2.0 * p0x * nx_a + (p0y + p1x) * ny_a)
    visc_n1 = nu * ((p0y + p1x) * nx_a + 2.0 * p1y * ny_a)

    V0, V1, D00, D01, D10, D11 = _face_containers(space, 6, q)
    sj = g.sjxw[space.f_sm, space.f_em]
    nx = nx_a[space.f_sm, space.f_em]
    ny = ny_a[space.f_sm, space.f_em]
    tau = space.tau_if[:, None] * nu
    j0 = space.gather_minus(f0) - space.gather_plus(f0)
    j1 = space.gather_minus(f1) - space.gather_plus(f1)
    avg0 = 0.5 * (space.gather_minus(visc_n0) - space.gather_plus(visc_n0))
    avg1 = 0.5 * (space.gather_minus(visc_n1) - space.gather_plus(visc_n1))
    Vm0 = -(avg0 - tau * j0) * sj
    Vm1 = -(avg1 - tau * j1) * sj
    space.scatter_faces(Vm0, -Vm0, V0)
    space.scatter_faces(Vm1, -Vm1, V1)
    # s-term data: -nu sym(jump x n), identical from both sides
    G00 = -nu * j0 * nx * sj
    G01 = -0.5 * nu * (j0 * ny + j1 * nx) * sj
    G11 = -nu * j1 * ny * sj
    space.scatter_faces(G00, G00, D00)
    space.scatter_faces(G01, G01, D01)
    space.scatter_faces(G01, G01, D10)
    space.scatter_faces(G11, G11, D11)
    for eb, sb, _ in bcs.dirichlet:
        sjb = g.sjxw[sb, eb]
        nbx, nby = nx_a[sb, eb], ny_a[sb, eb]
        taub = space.tau_e[eb][:, None] * nu
        ub0, ub1 = f0[sb, eb], f1[sb, eb]
        V0[sb, eb] = -(visc_n0[sb, eb] - 2.0 * taub * ub0) * sjb
        V1[sb, eb] = -(visc_n1[sb, eb] - 2.0 * taub * ub1) * sjb
        D00[sb, eb] = -2.0 * nu * ub0 * nbx * sjb
        D01[sb, eb] = -nu * (ub0 * nby + ub1 * nbx) * sjb
        D10[sb, eb] = D01[sb, eb]
        D11[sb, eb] = -2.0 * nu * ub1 * nby * sjb

    kernels.face_lift_values(V0, b, out[0])
    kernels.face_lift_values(V1, b, out[1])
    rx, ry = _ref_test_face(g, D00, D01)
    kernels.face_lift_gradients(rx, ry, b, out[0])
    rx, ry = _ref_test_face(g, D10, D11)
    kernels.face_lift_gradients(rx, ry, b, out[1])
    return out


def viscous_rhs_bc(space: DgSpace, bcs: ResolvedBCs, t: float,
                   nu: float) -> np.ndarray:
    """Boundary data terms of the viscous solve at time t."""
    b, g = space.basis, space.geom
    q = b.n_q
    V0, V1, D00, D01, D10, D11 = _face_containers(space, 6, q)
    for eb, sb, bc in bcs.dirichlet:
        x = g.xf[:, sb, eb]
        gu = bc.g(x, t)
        sjb = g.sjxw[sb, eb]
        nbx, nby = g.normal[0, sb, eb], g.normal[1, sb, eb]
        taub = space.tau_e[eb][:, None] * nu
        V0[sb, eb] = 2.0 * taub * gu[0] * sjb
        V1[sb, eb] = 2.0 * taub * gu[1] * sjb
        D00[sb, eb] = -2.0 * nu * gu[0] * nbx * sjb
        D01[sb, eb] = -nu * (gu[0] * nby + gu[1] * nbx) * sjb
        D10[sb, eb] = D01[sb, eb]
        D11[sb, eb] = -2.0 * nu * gu[1] * nby * sjb
    for eb, sb, bc in bcs.neumann:
        x = g.xf[:, sb, eb]
        h = bc.h(x, t)
        gp = bc.g_p(x, t)
        sjb = g.sjxw[sb, eb]
        V0[sb, eb] = (h[0] + gp * g.normal[0, sb, eb]) * sjb
        V1[sb, eb] = (h[1] + gp * g.normal[1, sb, eb]) * sjb
    m = space.k + 1
    out = np.zeros((2, m, space.mesh.n_elements, m))
    kernels.face_lift_values(V0, b, out[0])
    kernels.face_lift_values(V1, b, out[1])
    rx, ry = _ref_test_face(g, D00, D01)
    kernels.face_lift_gradients(rx, ry, b, out[0])
    rx, ry = _ref_test_face(g, D10, D11)
    kernels.face_lift_gradients(rx, ry, b, out[1])
    return out


# ---------------------------------------------------------------------------
# convective term

def eval_convective_rhs(space: DgSpace, bcs: ResolvedBCs, history,
                        betas, times, t_np1: float,
                        body_force: Optional[Callable] = None) -> np.ndarray:
    """Extrapolated convective residual plus body force.

    history[i] is the velocity at times[i]; the result is
    sum_i beta_i [ (grad v, u u) - (v, F* . n) ] + (v, f(t^{n+1})) with the
    local Lax-Friedrichs flux, evaluated on the over-integration rule.
    """
    b, g = space.basis_over
    q = b.n_q
    m = space.k + 1
    out = np.zeros((2, m, space.mesh.n_elements, m))
    for beta, u, t_i in zip(betas, history, times):
        v0 = kernels.vol_values(u[0], b)
        v1 = kernels.vol_values(u[1], b)
        t00 = v0 * v0 * g.jxw
        t01 = v0 * v1 * g.jxw
        t11 = v1 * v1 * g.jxw
        rx, ry = _ref_test_vol(g, t00, t01)
        out[0] += beta * kernels.vol_integrate_gradients(rx, ry, b)
        rx, ry = _ref_test_vol(g, t01, t11)
        out[1] += beta * kernels.vol_integrate_gradients(rx, ry, b)

        f0 = kernels.face_values(u[0], b)
        f1 = kernels.face_values(u[1], b)
        V0, V1 = _face_containers(space, 2, q)
        sj = g.sjxw[space.f_sm, space.f_em]
        nx = g.normal[0, space.f_sm, space.f_em]
        ny = g.normal[1, space.f_sm, space.f_em]
        um0 = space.gather_minus(f0)
        um1 = space.gather_minus(f1)
        up0 = space.gather_plus(f0)
        up1 = space.gather_plus(f1)
        Fm0, Fm1 = _lax_friedrichs(um0, um1, up0, up1, nx, ny)
        Vm0 = -beta * Fm0 * sj
        Vm1 = -beta * Fm1 * sj
        space.scatter_faces(Vm0, -Vm0, V0)
        space.scatter_faces(Vm1, -Vm1, V1)
        for eb, sb, bc in bcs.dirichlet:
            x = g.xf[:, sb, eb]
            gu = bc.g(x, t_i)
            nbx, nby = g.normal[0, sb, eb], g.normal[1, sb, eb]
            ub0, ub1 = f0[sb, eb], f1[sb, eb]
            # mirror state reproduces the one-sided Dirichlet flux
            Fb0, Fb1 = _lax_friedrichs(ub0, ub1, 2 * gu[0] - ub0,
                                       2 * gu[1] - ub1, nbx, nby)
            V0[sb, eb] = -beta * Fb0 * g.sjxw[sb, eb]
            V1[sb, eb] = -beta * Fb1 * g.sjxw[sb, eb]
        for eb, sb, _ in bcs.neumann:
            un = f0[sb, eb] * g.normal[0, sb, eb] + \
                f1[sb, eb] * g.normal[1, sb, eb]
            V0[sb, eb] = -beta * f0[sb, eb] * un * g.sjxw[sb, eb]
            V1[sb, eb] = -beta * f1[sb, eb] * un * g.sjxw[sb, eb]
        kernels.face_lift_values(V0, b, out[0])
        kernels.face_lift_values(V1, b, out[1])

    if body_force is not None:
        f = body_force(g.xq, t_np1)
        out[0] += kernels.vol_integrate_values(f[0] * g.jxw, b)
        out[1] += kernels.vol_integrate_values(f[1] * g.jxw, b)
    return out


def _lax_friedrichs(um0, um1, up0, up1, nx, ny):
    """F*(u) . n^- of the local Lax-Friedrichs flux, per quadrature point."""
    unm = um0 * nx + um1 * ny
    unp = up0 * nx + up1 * ny
    lam = 2.0 * np.maximum(np.abs(unm), np.abs(unp))
    F0 = 0.5 * (um0 * unm + up0 * unp) + 0.5 * lam * (um0 - up0)
    F1 = 0.5 * (um1 * unm + up1 * unp) + 0.5 * lam * (um1 - up1)
    return F0, F1


# ---------------------------------------------------------------------------
# vorticity and the consistent pressure Neumann data

def compute_vorticity(space: DgSpace, u: np.ndarray) -> np.ndarray:
    """Element-local L2 projection of du2/dx - du1/dy (scalar in 2D)."""
    b, g = space.basis, space.geom
    _, g0x, g0y = kernels.vol_values_and_gradients(u[0], b)
    _, g1x, g1y = kernels.vol_values_and_gradients(u[1], b)
    _, u0y = _phys_grad_vol(g, g0x, g0y)
    u1x, _ = _phys_grad_vol(g, g1x, g1y)
    r = kernels.vol_integrate_values((u1x - u0y) * g.jxw, b)
    return kernels.apply_inverse_mass(r, b, g.jxw)


def eval_pressure_neumann_rhs(space: DgSpace, bcs: ResolvedBCs, history,
                              vorticity_history, betas, nu: float,
                              t_np1: float,
                              body_force: Optional[Callable] = None
                              ) -> np.ndarray:
    """Consistent pressure boundary data on velocity-Dirichlet faces.

    Surface integral of -(dg/dt + sum_i beta_i (div F^c(u^{n-i})
    + nu curl omega^{n-i}) - f^{n+1}) . n against pressure test functions.
    """
    b, g = space.basis, space.geom
    q = b.n_q
    Vc, = _face_containers(space, 1, q)
    if not bcs.dirichlet:
        return np.zeros((space.k + 1, space.mesh.n_elements, space.k + 1))

    # precompute face traces of the history terms on all faces once
    hp0 = [np.zeros((4, space.mesh.n_elements, q)) for _ in range(2)]
    for beta, u, w in zip(betas, history, vorticity_history):
        f0 = kernels.face_values(u[0], b)
        f1 = kernels.face_values(u[1], b)
        g0x, g0y = kernels.face_gradients(u[0], b)
        g1x, g1y = kernels.face_gradients(u[1], b)
        u0x, u0y = _phys_grad_face(g, g0x, g0y)
        u1x, u1y = _phys_grad_face(g, g1x, g1y)
        div = u0x + u1y
        # div(u x u) = u div u + (u . grad) u
        c0 = f0 * div + f0 * u0x + f1 * u0y
        c1 = f1 * div + f0 * u1x + f1 * u1y
        wx, wy = kernels.face_gradients(w, b)
        pwx, pwy = _phys_grad_face(g, wx, wy)
        # curl of the scalar vorticity: (dw/dy, -dw/dx)
        hp0[0] += beta * (c0 + nu * pwy)
        hp0[1] += beta * (c1 - nu * pwx)

    for eb, sb, bc in bcs.dirichlet:
        x = g.xf[:, sb, eb]
        if bc.dg_dt is not None:
            dg = bc.dg_dt(x, t_np1)
        else:
            dg = np.zeros((2,) + x.shape[1:])
        h0 = dg[0] + hp0[0][sb, eb]
        h1 = dg[1] + hp0[1][sb, eb]
        if body_force is not None:
            fb = body_force(x, t_np1)
            h0 = h0 - fb[0]
            h1 = h1 - fb[1]
        hn = h0 * g.normal[0, sb, eb] + h1 * g.normal[1, sb, eb]
        Vc[sb, eb] = -hn * g.sjxw[sb, eb]
    out = np.zeros((space.k + 1, space.mesh.n_elements, space.k + 1))
    kernels.face_lift_values(Vc, b, out)
    return out


def _laplace_block_apply(space: DgSpace, p: np.ndarray, bcs: ResolvedBCs,
                         tau_scale: float) -> np.ndarray:
    """Element-block part of the SIP Laplacian (neighbor traces zeroed).

    Used to extract the operator diagonal matrix-free: applying this to a
    field that is the same local unit vector in every element returns the
    diagonal entries of that local index.
    """
    b, g = space.basis, space.geom
    q = b.n_q
    vals, gx, gy = kernels.vol_values_and_gradients(p, b)
    px, py = _phys_grad_vol(g, gx, gy)
    rx, ry = _ref_test_vol(g, px * g.jxw, py * g.jxw)
    out = kernels.vol_integrate_gradients(rx, ry, b)

    fv = kernels.face_values(p, b)
    fgx, fgy = kernels.face_gradients(p, b)
    pxf, pyf = _phys_grad_face(g, fgx, fgy)
    gn = g.normal[0] * pxf + g.normal[1] * pyf
    Vc, Dx, Dy = _face_containers(space, 3, q)
    for side in ("m", "p"):
        ee = space.f_em if side == "m" else space.f_ep
        ss = space.f_sm if side == "m" else space.f_sp
        sj = g.sjxw[ss, ee]
        tau = tau_scale * space.tau_if[:, None]
        v = fv[ss, ee]
        Vc[ss, ee] = -(0.5 * gn[ss, ee] - tau * v) * sj
        Dx[ss, ee] = -0.5 * v * g.normal[0, ss, ee] * sj
        Dy[ss, ee] = -0.5 * v * g.normal[1, ss, ee] * sj
    for eb, sb, _ in bcs.neumann:
        sjb = g.sjxw[sb, eb]
        vb = fv[sb, eb]
        taub = tau_scale * space.tau_e[eb][:, None]
        Vc[sb, eb] = -(gn[sb, eb] - 2.0 * taub * vb) * sjb
        Dx[sb, eb] = -vb * g.normal[0, sb, eb] * sjb
        Dy[sb, eb] = -vb * g.normal[1, sb, eb] * sjb
    rxf, ryf = _ref_test_face(g, Dx, Dy)
    kernels.face_lift_values(Vc, b, out)
    kernels.face_lift_gradients(rxf, ryf, b, out)
    return out


def laplace_diagonal(space: DgSpace, bcs: ResolvedBCs,
                     tau_scale: float = 1.0) -> np.ndarray:
    """Exact diagonal of the SIP Laplacian, (m, ne, m)."""
    m = space.k + 1
    ne = space.mesh.n_elements
    diag = np.empty((m, ne, m))
    unit = np.zeros((m, ne, m))
    for iy in range(m):
        for ix in range(m):
            unit[...] = 0.0
            unit[iy, :, ix] = 1.0
            out = _laplace_block_apply(space, unit, bcs, tau_scale)
            diag[iy, :, ix] = out[iy, :, ix]
    return diag


# ---------------------------------------------------------------------------
# penalty parameters

def compute_penalty_parameters(space: DgSpace, u: np.ndarray, dt: float,
                               cfl: float, cfg: VariantConfig):
    """tau_D per element and tau_C per interior face from the current
    velocity: tau_D = zeta_D |u_mean| h dt, tau_C = zeta_C |u_mean| dt with
    zeta = zeta*/CFL and h = sqrt(element volume)."""
    if cfl <= 0:
        raise ValueError(f"CFL must be positive, got {cfl}")
    b, g = space.basis, space.geom
    mean0 = (kernels.vol_values(u[0], b) * g.jxw).sum(axis=(0, 2))
    mean1 = (kernels.vol_values(u[1], b) * g.jxw).sum(axis=(0, 2))
    norm = np.hypot(mean0, mean1) / g.volumes
    tau_d_e = None
    tau_c_f = None
    if cfg.uses_divdiv:
        h = np.sqrt(g.volumes)
        tau_d_e = (cfg.zeta_d_star / cfl) * norm * h * dt
    if cfg.uses_jump:
        tau_c_e = (cfg.zeta_c_star / cfl) * norm * dt
        tau_c_f = 0.5 * (tau_c_e[space.f_em] + tau_c_e[space.f_ep])
    return tau_d_e, tau_c_f
