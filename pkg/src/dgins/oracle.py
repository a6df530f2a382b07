"""Dense naive-quadrature reference assembly.

Independent implementation of every spatial operator: full (k+1)^2 x n_q^2
shape-function tables, explicit loops over elements and faces, global dense
matrices in the element-major flat layout. No sum factorization anywhere.
Used by the self-test command and the operator equivalence tests; meshes
are expected to be small (tens of elements).
"""

import numpy as np

from .basis import get_basis
from .spaces import DgSpace

class DenseOracle:
    def __init__(self, space: DgSpace):
        self.space = space
        self.k = space.k
        self.m = space.k + 1
        self.nloc = self.m * self.m
        self.ne = space.mesh.n_elements
        self.n_scalar = self.ne * self.nloc
        b = space.basis
        self.tables = self._build_tables(b)
        self.tables_over = self._build_tables(space.basis_over[0])

    def _build_tables(self, b):
        q, m = b.S.shape
        val = np.einsum("qi,pj->qpij", b.S, b.S).reshape(q * q, m * m)
        gx = np.einsum("qi,pj->qpij", b.S, b.D).reshape(q * q, m * m)
        gy = np.einsum("qi,pj->qpij", b.D, b.S).reshape(q * q, m * m)
        rows = {"-1y": b.left_value, "+1y": b.right_value}
        fval, fgx, fgy = {}, {}, {}
        for s in range(4):
            if s in (0, 1):
                ev = b.left_value if s == 0 else b.right_value
                ed = b.left_deriv if s == 0 else b.right_deriv
                fval[s] = np.einsum("qi,j->qij", b.S, ev).reshape(q, m * m)
                fgx[s] = np.einsum("qi,j->qij", b.S, ed).reshape(q, m * m)
                fgy[s] = np.einsum("qi,j->qij", b.D, ev).reshape(q, m * m)
            else:
                ev = b.left_value if s == 2 else b.right_value
                ed = b.left_deriv if s == 2 else b.right_deriv
                fval[s] = np.einsum("i,qj->qij", ev, b.S).reshape(q, m * m)
                fgx[s] = np.einsum("i,qj->qij", ev, b.D).reshape(q, m * m)
                fgy[s] = np.einsum("i,qj->qij", ed, b.S).reshape(q, m * m)
        return {"val": val, "gx": gx, "gy": gy, "fval": fval, "fgx": fgx,
                "fgy": fgy, "nq": q}

    # --- per-element physical tables -------------------------------------

    def _vol_phys(self, e, geom, tables):
        """Value/physical-gradient tables and weights of element e."""
        jit = geom.jinvT[:, :, :, e, :]
        w = geom.jxw[:, e, :].ravel()
        gx = tables["gx"]
        gy = tables["gy"]
        px = jit[0, 0].ravel()[:, None] * gx + jit[0, 1].ravel()[:, None] * gy
        py = jit[1, 0].ravel()[:, None] * gx + jit[1, 1].ravel()[:, None] * gy
        return tables["val"], px, py, w

    def _face_phys(self, e, s, geom, tables, flipped=False):
        """Trace tables of element e on slot s, optionally in reversed
        quadrature order (to match the other side of a flipped face)."""
        T = tables["fval"][s]
        gx = tables["fgx"][s]
        gy = tables["fgy"][s]
        jit = geom.jinvT_f[:, :, s, e, :]
        px = jit[0, 0][:, None] * gx + jit[0, 1][:, None] * gy
        py = jit[1, 0][:, None] * gx + jit[1, 1][:, None] * gy
        if flipped:
            return T[::-1], px[::-1], py[::-1]
        return T, px, py

    def _sdofs(self, e):
        return np.arange(e * self.nloc, (e + 1) * self.nloc)

    def _vdofs(self, e):
        s = self._sdofs(e)
        return np.concatenate([s, self.n_scalar + s])

    # --- assemblies -------------------------------------------------------

    def mass_matrix(self, ncomp=1):
        g = self.space.geom
        A = np.zeros((self.n_scalar, self.n_scalar))
        for e in range(self.ne):
            val, _, _, w = self._vol_phys(e, g, self.tables)
            A[np.ix_(self._sdofs(e), self._sdofs(e))] = val.T @ (w[:, None] * val)
        if ncomp == 1:
            return A
        Z = np.zeros_like(A)
        return np.block([[A, Z], [Z, A]])

    def laplace_matrix(self, bcs, tau_scale=1.0):
        sp = self.space
        g = sp.geom
        A = np.zeros((self.n_scalar, self.n_scalar))
        for e in range(self.ne):
            _, px, py, w = self._vol_phys(e, g, self.tables)
            A[np.ix_(self._sdofs(e), self._sdofs(e))] += \
                px.T @ (w[:, None] * px) + py.T @ (w[:, None] * py)
        f = sp.mesh.interior
        for i in range(f.n):
            em, sm, ep, sp_ = f.em[i], f.sm[i], f.ep[i], f.sp[i]
            Tm, pxm, pym = self._face_phys(em, sm, g, self.tables)
            Tp, pxp, pyp = self._face_phys(ep, sp_, g, self.tables, f.flip[i])
            nx = g.normal[0, sm, em][:, None]
            ny = g.normal[1, sm, em][:, None]
            w = g.sjxw[sm, em]
            tau = tau_scale * sp.tau_if[i]
            avg = 0.5 * np.concatenate([pxm * nx + pym * ny,
                                        pxp * nx + pyp * ny], axis=1)
            jmp = np.concatenate([Tm, -Tp], axis=1)
            blk = (-avg.T @ (w[:, None] * jmp) - jmp.T @ (w[:, None] * avg)
                   + tau * jmp.T @ (w[:, None] * jmp))
            dofs = np.concatenate([self._sdofs(em), self._sdofs(ep)])
            A[np.ix_(dofs, dofs)] += blk
        for eb, sb, _ in bcs.neumann:
            for e, s in zip(eb, sb):
                T, px, py = self._face_phys(e, s, g, self.tables)
                nx = g.normal[0, s, e][:, None]
                ny = g.normal[1, s, e][:, None]
                w = g.sjxw[s, e]
                Gn = px * nx + py * ny
                tau = tau_scale * sp.tau_e[e]
                blk = (-Gn.T @ (w[:, None] * T) - T.T @ (w[:, None] * Gn)
                       + 2.0 * tau * T.T @ (w[:, None] * T))
                A[np.ix_(self._sdofs(e), self._sdofs(e))] += blk
        return A

    def helmholtz_matrix(self, bcs, gamma0_dt, nu):
        sp = self.space
        g = sp.geom
        n = 2 * self.n_scalar
        A = gamma0_dt * self.mass_matrix(ncomp=2)
        if nu == 0.0:
            return A
        for e in range(self.ne):
            val, px, py, w = self._vol_phys(e, g, self.tables)
            z = np.zeros_like(px)
            # strain rows for [u0-block | u1-block] columns
            e00 = np.concatenate([px, z], axis=1)
            e11 = np.concatenate([z, py], axis=1)
            e01 = 0.5 * np.concatenate([py, px], axis=1)
            blk = 2.0 * nu * (e00.T @ (w[:, None] * e00)
                              + e11.T @ (w[:, None] * e11)
                              + 2.0 * e01.T @ (w[:, None] * e01))
            A[np.ix_(self._vdofs(e), self._vdofs(e))] += blk
        f = sp.mesh.interior
        for i in range(f.n):
            em, sm, ep, sp_ = f.em[i], f.sm[i], f.ep[i], f.sp[i]
            Tm, pxm, pym = self._face_phys(em, sm, g, self.tables)
            Tp, pxp, pyp = self._face_phys(ep, sp_, g, self.tables, f.flip[i])
            nx = g.normal[0, sm, em][:, None]
            ny = g.normal[1, sm, em][:, None]
            w = g.sjxw[sm, em]
            tau = sp.tau_if[i] * nu
            nq = len(w)
            z = np.zeros_like(Tm)
            # per velocity component: value traces over [u0 | u1] columns
            Vm0 = np.concatenate([Tm, z], axis=1)
            Vm1 = np.concatenate([z, Tm], axis=1)
            zp = np.zeros_like(Tp)
            Vp0 = np.concatenate([Tp, zp], axis=1)
            Vp1 = np.concatenate([zp, Tp], axis=1)

            # rows of 2 nu eps(u) . n over [u0 | u1] columns
            def viscn2(px_, py_):
                # columns are [u0 dofs | u1 dofs]
                c = px_.shape[1]
                r0 = np.zeros((nq, 2 * c))
                r1 = np.zeros((nq, 2 * c))
                r0[:, :c] = nu * (2 * px_ * nx + py_ * ny)
                r0[:, c:] = nu * (px_ * ny)
                r1[:, :c] = nu * (py_ * nx)
                r1[:, c:] = nu * (px_ * nx + 2 * py_ * ny)
                return r0, r1
            Gm0, Gm1 = viscn2(pxm, pym)
            Gp0, Gp1 = viscn2(pxp, pyp)
            dofs = np.concatenate([self._vdofs(em), self._vdofs(ep)])
            blk = np.zeros((len(dofs), len(dofs)))
            for (Vm, Vp, Gm, Gp) in ((Vm0, Vp0, Gm0, Gp0),
                                     (Vm1, Vp1, Gm1, Gp1)):
                avg = 0.5 * np.concatenate([Gm, Gp], axis=1)
                jmp = np.concatenate([Vm, -Vp], axis=1)
                blk += (-avg.T @ (w[:, None] * jmp)
                        - jmp.T @ (w[:, None] * avg)
                        + tau * jmp.T @ (w[:, None] * jmp))
            A[np.ix_(dofs, dofs)] += blk
        for eb, sb, _ in bcs.dirichlet:
            for e, s in zip(eb, sb):
                T, px, py = self._face_phys(e, s, g, self.tables)
                nx = g.normal[0, s, e][:, None]
                ny = g.normal[1, s, e][:, None]
                w = g.sjxw[s, e]
                tau = sp.tau_e[e] * nu
                nq = len(w)
                c = T.shape[1]
                V0 = np.zeros((nq, 2 * c)); V0[:, :c] = T
                V1 = np.zeros((nq, 2 * c)); V1[:, c:] = T
                G0 = np.zeros((nq, 2 * c))
                G1 = np.zeros((nq, 2 * c))
                G0[:, :c] = nu * (2 * px * nx + py * ny)
                G0[:, c:] = nu * (px * ny)
                G1[:, :c] = nu * (py * nx)
                G1[:, c:] = nu * (px * nx + 2 * py * ny)
                blk = np.zeros((2 * c, 2 * c))
                for (V, G) in ((V0, G0), (V1, G1)):
                    blk += (-G.T @ (w[:, None] * V) - V.T @ (w[:, None] * G)
                            + 2.0 * tau * V.T @ (w[:, None] * V))
                A[np.ix_(self._vdofs(e), self._vdofs(e))] += blk
        return A

    def projection_matrix(self, tau_d_e=None, tau_c_f=None):
        sp = self.space
        g = sp.geom
        A = self.mass_matrix(ncomp=2)
        if tau_d_e is not None:
            for e in range(self.ne):
                _, px, py, w = self._vol_phys(e, g, self.tables)
                div = np.concatenate([px, py], axis=1)
                A[np.ix_(self._vdofs(e), self._vdofs(e))] += \
                    tau_d_e[e] * div.T @ (w[:, None] * div)
        if tau_c_f is not None:
            f = sp.mesh.interior
            for i in range(f.n):
                em, sm, ep, sp_ = f.em[i], f.sm[i], f.ep[i], f.sp[i]
                Tm, _, _ = self._face_phys(em, sm, g, self.tables)
                Tp, _, _ = self._face_phys(ep, sp_, g, self.tables, f.flip[i])
                w = g.sjxw[sm, em]
                dofs = np.concatenate([self._vdofs(em), self._vdofs(ep)])
                c = Tm.shape[1]
                nq = len(w)
                blk = np.zeros((4 * c, 4 * c))
                for comp in range(2):
                    J = np.zeros((nq, 4 * c))
                    J[:, comp * c:(comp + 1) * c] = Tm
                    J[:, (2 + comp) * c:(3 + comp) * c] = -Tp
                    blk += tau_c_f[i] * J.T @ (w[:, None] * J)
                A[np.ix_(dofs, dofs)] += blk
        return A

    def divergence_form_matrix(self, bcs, scale, form):
        """a(q, u): rows pressure dofs, columns velocity dofs."""
        sp = self.space
        g = sp.geom
        A = np.zeros((self.n_scalar, 2 * self.n_scalar))
        for e in range(self.ne):
            val, px, py, w = self._vol_phys(e, g, self.tables)
            div = np.concatenate([px, py], axis=1)
            rows = self._sdofs(e)
            if form == "standard":
                A[np.ix_(rows, self._vdofs(e))] += \
                    -scale * val.T @ (w[:, None] * div)
            else:
                # (grad q, u): test gradient component a against u_a
                vv = np.concatenate([val, np.zeros_like(val)], axis=1)
                ww = np.concatenate([np.zeros_like(val), val], axis=1)
                A[np.ix_(rows, self._vdofs(e))] += scale * (
                    px.T @ (w[:, None] * vv) + py.T @ (w[:, None] * ww))
        if form == "standard":
            return A
        f = sp.mesh.interior
        for i in range(f.n):
            em, sm, ep, sp_ = f.em[i], f.sm[i], f.ep[i], f.sp[i]
            Tm, _, _ = self._face_phys(em, sm, g, self.tables)
            Tp, _, _ = self._face_phys(ep, sp_, g, self.tables, f.flip[i])
            nx = g.normal[0, sm, em][:, None]
            ny = g.normal[1, sm, em][:, None]
            w = g.sjxw[sm, em]
            c = Tm.shape[1]
            nq = len(w)
            # {{u}} . n^- over columns [u0m u1m u0p u1p]
            Un = np.zeros((nq, 4 * c))
            Un[:, 0 * c:1 * c] = 0.5 * Tm * nx
            Un[:, 1 * c:2 * c] = 0.5 * Tm * ny
            Un[:, 2 * c:3 * c] = 0.5 * Tp * nx
            Un[:, 3 * c:4 * c] = 0.5 * Tp * ny
            cols = np.concatenate([self._vdofs(em), self._vdofs(ep)])
            # -(q^-, {{u}} . n^-) + (q^+, {{u}} . n^-)  (n^+ = -n^-)
            A[np.ix_(self._sdofs(em), cols)] += -scale * Tm.T @ (w[:, None] * Un)
            A[np.ix_(self._sdofs(ep), cols)] += scale * Tp.T @ (w[:, None] * Un)
        for groups in (bcs.dirichlet, bcs.neumann):
            for eb, sb, _ in groups:
                for e, s in zip(eb, sb):
                    T, _, _ = self._face_phys(e, s, g, self.tables)
                    nx = g.normal[0, s, e][:, None]
                    ny = g.normal[1, s, e][:, None]
                    w = g.sjxw[s, e]
                    c = T.shape[1]
                    Un = np.concatenate([T * nx, T * ny], axis=1)
                    A[np.ix_(self._sdofs(e), self._vdofs(e))] += \
                        -scale * T.T @ (w[:, None] * Un)
        return A

    def pressure_gradient_matrix(self, bcs, scale, form):
        """b(v, p): rows velocity dofs, columns pressure dofs."""
        sp = self.space
        g = sp.geom
        A = np.zeros((2 * self.n_scalar, self.n_scalar))
        for e in range(self.ne):
            val, px, py, w = self._vol_phys(e, g, self.tables)
            rows = self._vdofs(e)
            cols = self._sdofs(e)
            if form == "standard":
                # -(v_a, scale dp/dx_a)
                blk = np.concatenate([
                    -scale * val.T @ (w[:, None] * px),
                    -scale * val.T @ (w[:, None] * py)], axis=0)
                A[np.ix_(rows, cols)] += blk
            else:
                blk = np.concatenate([
                    scale * px.T @ (w[:, None] * val),
                    scale * py.T @ (w[:, None] * val)], axis=0)
                A[np.ix_(rows, cols)] += blk
        if form == "standard":
            return A
        f = sp.mesh.interior
        for i in range(f.n):
            em, sm, ep, sp_ = f.em[i], f.sm[i], f.ep[i], f.sp[i]
            Tm, _, _ = self._face_phys(em, sm, g, self.tables)
            Tp, _, _ = self._face_phys(ep, sp_, g, self.tables, f.flip[i])
            nx = g.normal[0, sm, em][:, None]
            ny = g.normal[1, sm, em][:, None]
            w = g.sjxw[sm, em]
            cols = np.concatenate([self._sdofs(em), self._sdofs(ep)])
            avgp = 0.5 * np.concatenate([Tm, Tp], axis=1)
            blkm = np.concatenate([
                -scale * (Tm * nx).T @ (w[:, None] * avgp),
                -scale * (Tm * ny).T @ (w[:, None] * avgp)], axis=0)
            blkp = np.concatenate([
                scale * (Tp * nx).T @ (w[:, None] * avgp),
                scale * (Tp * ny).T @ (w[:, None] * avgp)], axis=0)
            A[np.ix_(self._vdofs(em), cols)] += blkm
            A[np.ix_(self._vdofs(ep), cols)] += blkp
        for groups in (bcs.dirichlet, bcs.neumann):
            for eb, sb, _ in groups:
                for e, s in zip(eb, sb):
                    T, _, _ = self._face_phys(e, s, g, self.tables)
                    nx = g.normal[0, s, e][:, None]
                    ny = g.normal[1, s, e][:, None]
                    w = g.sjxw[s, e]
                    blk = np.concatenate([
                        -scale * (T * nx).T @ (w[:, None] * T),
                        -scale * (T * ny).T @ (w[:, None] * T)], axis=0)
                    A[np.ix_(self._vdofs(e), self._sdofs(e))] += blk
        return A

    def convective_residual(self, bcs, history_flat, betas, times, t_np1,
                            body_force=None):
        """Naive evaluation of the convective right-hand side."""
        sp = self.space
        bo, go = sp.basis_over
        t = self.tables_over
        out = np.zeros(2 * self.n_scalar)
        for beta, uflat, ti in zip(betas, history_flat, times):
            u0 = uflat[:self.n_scalar]
            u1 = uflat[self.n_scalar:]
            for e in range(self.ne):
                jit = go.jinvT[:, :, :, e, :]
                w = go.jxw[:, e, :].ravel()
                gx, gy = t["gx"], t["gy"]
                px = jit[0, 0].ravel()[:, None] * gx + \
                    jit[0, 1].ravel()[:, None] * gy
                py = jit[1, 0].ravel()[:, None] * gx + \
                    jit[1, 1].ravel()[:, None] * gy
                d0 = u0[self._sdofs(e)]
                d1 = u1[self._sdofs(e)]
                v0 = t["val"] @ d0
                v1 = t["val"] @ d1
                r0 = px.T @ (w * v0 * v0) + py.T @ (w * v0 * v1)
                r1 = px.T @ (w * v1 * v0) + py.T @ (w * v1 * v1)
                out[self._sdofs(e)] += beta * r0
                out[self.n_scalar + self._sdofs(e)] += beta * r1
            f = sp.mesh.interior
            for i in range(f.n):
                em, sm, ep, sp_ = f.em[i], f.sm[i], f.ep[i], f.sp[i]
                Tm, _, _ = self._face_phys(em, sm, go, t)
                Tp, _, _ = self._face_phys(ep, sp_, go, t, f.flip[i])
                nx = go.normal[0, sm, em]
                ny = go.normal[1, sm, em]
                w = go.sjxw[sm, em]
                um0 = Tm @ u0[self._sdofs(em)]
                um1 = Tm @ u1[self._sdofs(em)]
                up0 = Tp @ u0[self._sdofs(ep)]
                up1 = Tp @ u1[self._sdofs(ep)]
                F0, F1 = _lf_flux(um0, um1, up0, up1, nx, ny)
                out[self._sdofs(em)] += -beta * Tm.T @ (w * F0)
                out[self.n_scalar + self._sdofs(em)] += -beta * Tm.T @ (w * F1)
                out[self._sdofs(ep)] += beta * Tp.T @ (w * F0)
                out[self.n_scalar + self._sdofs(ep)] += beta * Tp.T @ (w * F1)
            for eb, sb, bc in bcs.dirichlet:
                for e, s in zip(eb, sb):
                    T, _, _ = self._face_phys(e, s, go, t)
                    x = go.xf[:, s, e]
                    gu = bc.g(x, ti)
                    nx = go.normal[0, s, e]
                    ny = go.normal[1, s, e]
                    w = go.sjxw[s, e]
                    ub0 = T @ u0[self._sdofs(e)]
                    ub1 = T @ u1[self._sdofs(e)]
                    F0, F1 = _lf_flux(ub0, ub1, 2 * gu[0] - ub0,
                                      2 * gu[1] - ub1, nx, ny)
                    out[self._sdofs(e)] += -beta * T.T @ (w * F0)
                    out[self.n_scalar + self._sdofs(e)] += -beta * T.T @ (w * F1)
            for eb, sb, _ in bcs.neumann:
                for e, s in zip(eb, sb):
                    T, _, _ = self._face_phys(e, s, go, t)
                    nx = go.normal[0, s, e]
                    ny = go.normal[1, s, e]
                    w = go.sjxw[s, e]
                    ub0 = T @ u0[self._sdofs(e)]
                    ub1 = T @ u1[self._sdofs(e)]
                    un = ub0 * nx + ub1 * ny
                    out[self._sdofs(e)] += -beta * T.T @ (w * ub0 * un)
                    out[self.n_scalar + self._sdofs(e)] += \
                        -beta * T.T @ (w * ub1 * un)
        if body_force is not None:
            for e in range(self.ne):
                w = go.jxw[:, e, :].ravel()
                x = go.xq[:, :, e, :].reshape(2, -1)
                fv = body_force(x, t_np1)
                out[self._sdofs(e)] += t["val"].T @ (w * fv[0])
                out[self.n_scalar + self._sdofs(e)] += t["val"].T @ (w * fv[1])
        return out


def _lf_flux(um0, um1, up0, up1, nx, ny):
    unm = um0 * nx + um1 * ny
    unp = up0 * nx + up1 * ny
    lam = 2.0 * np.maximum(np.abs(unm), np.abs(unp))
    F0 = 0.5 * (um0 * unm + up0 * unp) + 0.5 * lam * (um0 - up0)
    F1 = 0.5 * (um1 * unm + up1 * unp) + 0.5 * lam * (um1 - up1)
    return F0, F1
