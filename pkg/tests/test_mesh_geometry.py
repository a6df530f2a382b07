import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgins.basis import get_basis
from dgins import kernels
from dgins.cylinder import CENTER, RADIUS, build_cylinder_mesh
from dgins.geometry import Geometry, compute_tau_ip
from dgins.mesh import build_box_mesh, box_mesh_hierarchy, grading_map, refine


class TestGradingMap:
    def test_endpoints(self):
        assert grading_map(0.0, 1.8, 1.0) == pytest.approx(-1.0)
        assert grading_map(1.0, 1.8, 1.0) == pytest.approx(1.0)

    def test_odd_symmetry(self):
        assert grading_map(0.5, 1.8, 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_quarter_point(self):
        # direct evaluation: tanh(-0.9)/tanh(1.8)
        expected = np.tanh(-0.9) / np.tanh(1.8)
        assert grading_map(0.25, 1.8, 1.0) == pytest.approx(expected)
        assert expected == pytest.approx(-0.75654, abs=5e-6)

    def test_gamma_zero_is_uniform(self):
        s = np.linspace(0, 1, 7)
        np.testing.assert_allclose(grading_map(s, 0.0, 2.0), 2.0 * (2 * s - 1))

    @given(st.floats(0.0, 5.0), st.integers(2, 40))
    @settings(max_examples=30, deadline=None)
    def test_strictly_monotone(self, gamma, n):
        s = np.linspace(0, 1, n)
        f = grading_map(s, gamma)
        assert (np.diff(f) > 0).all()

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError):
            grading_map(0.5, -1.0)


class TestBoxMesh:
    def test_counts_and_tags(self):
        m = build_box_mesh(((0, 1), (0, 2)), (3, 4))
        assert m.n_elements == 12
        assert sorted(m.tag_names) == ["xmax", "xmin", "ymax", "ymin"]
        assert m.boundary.n == 2 * 3 + 2 * 4
        assert m.interior.n == 2 * 4 + 3 * 3

    def test_every_face_accounted(self):
        m = build_box_mesh(((0, 1), (0, 1)), (4, 4), grading=(1.2, 0.0))
        # each (elem, slot) appears exactly once across interior and boundary
        seen = set()
        f = m.interior
        for i in range(f.n):
            seen.add((f.em[i], f.sm[i]))
            seen.add((f.ep[i], f.sp[i]))
        b = m.boundary
        for i in range(b.n):
            seen.add((b.elem[i], b.slot[i]))
        assert len(seen) == 4 * m.n_elements

    def test_periodic_becomes_interior(self):
        m = build_box_mesh(((0, 1), (0, 1)), (4, 4), periodic=(True, True))
        assert m.boundary.n == 0
        assert m.interior.n == 2 * 4 * 4
        assert len(m.periodic_pairs) == 8

    def test_periodic_partner_coincides_to_translation(self):
        m = build_box_mesh(((0, 2), (0, 1)), (4, 3), periodic=(True, False))
        g = Geometry(m, 4)
        for fidx, tr in m.periodic_pairs:
            f = m.interior
            em, sm, ep, sp = f.em[fidx], f.sm[fidx], f.ep[fidx], f.sp[fidx]
            xm = g.xf[:, sm, em]
            xp = g.xf[:, sp, ep]
            if f.flip[fidx]:
                xp = xp[:, ::-1]
            np.testing.assert_allclose(xm + tr[:, None], xp, atol=1e-12)

    def test_periodic_with_grading_rejected(self):
        with pytest.raises(ValueError):
            build_box_mesh(((0, 1), (0, 1)), (4, 4), grading=(1.0, 0.0),
                           periodic=(True, False))

    def test_nonpositive_extent_rejected(self):
        with pytest.raises(ValueError):
            build_box_mesh(((0, 0), (0, 1)), (2, 2))
        with pytest.raises(ValueError):
            build_box_mesh(((0, 1), (0, 1)), (0, 2))

    def test_graded_nodes_follow_map(self):
        m = build_box_mesh(((-1, 1), (-1, 1)), (4, 4), grading=(1.8, 1.8))
        xs = np.unique(np.round(m.vertices[:, 0], 12))
        expected = grading_map(np.linspace(0, 1, 5), 1.8, 1.0)
        np.testing.assert_allclose(xs, expected, atol=1e-12)

    def test_hierarchy_nesting(self):
        meshes = box_mesh_hierarchy(((-1, 1), (0, 1)), (2, 1), 2,
                                    grading=(0.0, 1.5))
        coarse, fine = meshes[1], meshes[2]
        assert fine.coarser is coarse
        # every coarse vertex appears among the fine vertices
        fs = {tuple(np.round(v, 12)) for v in fine.vertices}
        for v in coarse.vertices:
            assert tuple(np.round(v, 12)) in fs
        # parent map consistent: child corners inside parent bounding box
        cc = coarse.corner_coords()
        for e in range(fine.n_elements):
            p = fine.parent[e]
            lo, hi = cc[p].min(axis=0), cc[p].max(axis=0)
            child = fine.corner_coords()[e]
            assert (child >= lo - 1e-12).all() and (child <= hi + 1e-12).all()

    def test_dump_roundtrip_linecount(self):
        m = build_box_mesh(((0, 1), (0, 1)), (2, 2))
        buf = io.StringIO()
        m.dump_text(buf)
        lines = buf.getvalue().strip().split("\n")
        assert len(lines) == m.n_vertices + m.n_elements + m.boundary.n + m.interior.n


class TestGeometryData:
    def test_affine_unit_square_detj(self):
        # one element on the unit physical square: det J = 1/4 everywhere
        m = build_box_mesh(((0, 1), (0, 1)), (1, 1))
        g = Geometry(m, 3)
        np.testing.assert_allclose(g.jxw.sum(), 1.0, atol=1e-13)
        w = get_basis(1, 3).rule.weights
        np.testing.assert_allclose(
            g.jxw[:, 0, :], 0.25 * np.outer(w, w), atol=1e-14)

    def test_volumes_sum_to_domain_area(self):
        m = build_box_mesh(((0, 2), (0, 3)), (5, 4), grading=(2.0, 1.0))
        g = Geometry(m, 4)
        assert g.volumes.sum() == pytest.approx(6.0, rel=1e-10)

    def test_normals_unit_and_opposite(self):
        m = build_box_mesh(((0, 1), (0, 1)), (3, 3), grading=(1.1, 0.7))
        g = Geometry(m, 4)
        np.testing.assert_allclose(np.hypot(g.normal[0], g.normal[1]), 1.0,
                                   atol=1e-13)
        f = m.interior
        nm = g.normal[:, f.sm, f.em]             # (2, nf, q)
        np_ = g.normal[:, f.sp, f.ep]
        flip = f.flip
        np_ = np.where(flip[None, :, None], np_[:, :, ::-1], np_)
        np.testing.assert_allclose(nm, -np_, atol=1e-12)

    def test_interior_face_points_coincide(self):
        m = build_box_mesh(((0, 1), (0, 1)), (3, 2), grading=(0.9, 0.4))
        g = Geometry(m, 5)
        f = m.interior
        xm = g.xf[:, f.sm, f.em]
        xp = g.xf[:, f.sp, f.ep]
        xp = np.where(f.flip[None, :, None], xp[:, :, ::-1], xp)
        np.testing.assert_allclose(xm, xp, atol=1e-12)

    def test_surface_jxw_matches_edge_lengths(self):
        m = build_box_mesh(((0, 2), (0, 1)), (2, 2))
        g = Geometry(m, 3)
        np.testing.assert_allclose(g.face_areas[0] + g.face_areas[1], 1.0,
                                   atol=1e-13)  # two vertical faces, 0.5 each
        np.testing.assert_allclose(g.face_areas[2] + g.face_areas[3], 2.0,
                                   atol=1e-13)


class TestTauIp:
    def test_unit_square_interior_element(self):
        # 3x3 grid of unit squares: middle element has 4 interior faces
        m = build_box_mesh(((0, 3), (0, 3)), (3, 3))
        g = Geometry(m, 4)
        tau_e, tau_if, tau_bf = compute_tau_ip(m, g, 3)
        assert tau_e[4] == pytest.approx(16 * (4 / 2) / 1, rel=1e-12)

    def test_element_with_dirichlet_face(self):
        # middle edge element: 3 interior + 1 boundary face
        m = build_box_mesh(((0, 3), (0, 3)), (3, 3))
        g = Geometry(m, 4)
        tau_e, _, _ = compute_tau_ip(m, g, 3)
        assert tau_e[3] == pytest.approx(16 * (3 / 2 + 1) / 1, rel=1e-12)

    def test_interior_face_max_of_equal(self):
        m = build_box_mesh(((0, 2), (0, 1)), (2, 1))
        g = Geometry(m, 3)
        tau_e, tau_if, _ = compute_tau_ip(m, g, 2)
        assert tau_if[0] == pytest.approx(tau_e[0])
        assert tau_e[0] == pytest.approx(tau_e[1])


class TestCylinderMesh:
    def test_coarse_element_count_and_dofs(self):
        m = build_cylinder_mesh(0, k_geo=4)
        assert m.n_elements == 136
        k = 4
        assert m.n_elements * (k + 1) ** 2 * 3 == 10200

    def test_refined_dof_count(self):
        m = build_cylinder_mesh(1, k_geo=4)
        assert m.n_elements == 544
        assert m.n_elements * 25 * 3 == 40800

    def test_negative_level_rejected(self):
        with pytest.raises(ValueError):
            build_cylinder_mesh(-1)

    @pytest.mark.parametrize("level", [0, 1])
    def test_boundary_nodes_on_circle(self, level):
        m = build_cylinder_mesh(level, k_geo=3)
        eb, sb = m.boundary_faces_of("cylinder")
        assert len(eb) == 16 * 2 ** level
        # the geometric mapping nodes of those faces sit on the circle
        def strip(e, s):
            if s == 0:
                return m.geom_nodes[:, :, e, 0]
            if s == 1:
                return m.geom_nodes[:, :, e, -1]
            if s == 2:
                return m.geom_nodes[:, 0, e, :]
            return m.geom_nodes[:, -1, e, :]
        for e, s in zip(eb, sb):
            xy = strip(e, s)
            r = np.hypot(xy[0] - CENTER[0], xy[1] - CENTER[1])
            np.testing.assert_allclose(r, RADIUS, atol=1e-12)

    def test_positive_jacobians_and_area(self):
        m = build_cylinder_mesh(0, k_geo=4)
        g = Geometry(m, 5)  # constructor raises on nonpositive det J
        exact = 2.2 * 0.41 - np.pi * RADIUS**2
        assert g.volumes.sum() == pytest.approx(exact, rel=1e-6)

    def test_area_converges_with_kgeo(self):
        exact = 2.2 * 0.41 - np.pi * RADIUS**2
        errs = []
        for kg in (2, 4):
            m = build_cylinder_mesh(0, k_geo=kg)
            g = Geometry(m, kg + 2)
            errs.append(abs(g.volumes.sum() - exact))
        assert errs[1] < errs[0] * 1e-2

    def test_cylinder_face_arclength_converges(self):
        # summed surface JxW over the circle faces -> 2 pi R, order k_geo+1
        exact = 2 * np.pi * RADIUS
        errs = []
        for level in (0, 1, 2):
            m = build_cylinder_mesh(level, k_geo=3)
            g = Geometry(m, 5)
            eb, sb = m.boundary_faces_of("cylinder")
            errs.append(abs(g.sjxw[sb, eb].sum() - exact))
        rate = np.log2(errs[0] / errs[1])
        assert rate > 3.5  # at least order k_geo + 1 = 4

    def test_min_edge_is_circle_chord(self):
        m = build_cylinder_mesh(0)
        chord = 2 * RADIUS * np.sin(np.pi / 16)
        assert m.min_edge_length() == pytest.approx(chord, rel=1e-12)

    def test_interior_points_coincide_on_curved_mesh(self):
        m = build_cylinder_mesh(0, k_geo=3)
        g = Geometry(m, 4)
        f = m.interior
        xm = g.xf[:, f.sm, f.em]
        xp = g.xf[:, f.sp, f.ep]
        xp = np.where(f.flip[None, :, None], xp[:, :, ::-1], xp)
        np.testing.assert_allclose(xm, xp, atol=1e-12)


def test_refine_preserves_tags_and_counts():
    m = build_box_mesh(((0, 1), (0, 1)), (2, 2))
    f = refine(m)
    assert f.n_elements == 16
    assert f.boundary.n == 2 * m.boundary.n
    assert sorted(f.tag_names) == sorted(m.tag_names)
    assert f.parent.shape == (16,)
    np.testing.assert_array_equal(f.parent[:4], 0)
