"""Quadrilateral meshes: graded boxes, face connectivity, refinement.

Conventions (fixed throughout the package):

* element corner order: c0 = (-1,-1), c1 = (+1,-1), c2 = (-1,+1),
  c3 = (+1,+1) in reference coordinates;
* face slots: 0: xi = -1, 1: xi = +1, 2: eta = -1, 3: eta = +1; the face
  parameter t runs in the direction of the increasing coordinate, so the
  ordered endpoint pairs are (c0,c2), (c1,c3), (c0,c1), (c2,c3);
* interior faces store both element/slot pairs plus a flip flag that is set
  when the two sides traverse the face in opposite directions;
* periodic boundaries become interior faces (plus a record of the pairing
  and translation), so no operator ever special-cases them.

Geometric mappings are nodal of degree k_geo on Gauss-Lobatto points,
stored in the (y-node, element, x-node) kernel layout. Elements are built
by transfinite interpolation from their four edge curves; edges on a curved
boundary are projected onto it, which keeps refined meshes boundary
conforming.
"""

from dataclasses import dataclass, field

import numpy as np

from .quadrature import gll_nodes

# ordered endpoint corners (increasing face parameter) per slot
SLOT_CORNERS = ((0, 2), (1, 3), (0, 1), (2, 3))


def grading_map(s, gamma: float, delta: float = 1.0):
    """Hyperbolic node grading [0,1] -> [-delta, delta].

    f(s) = delta * tanh(gamma (2s-1)) / tanh(gamma); gamma = 0 is the
    uniform-spacing limit delta * (2s-1). Strictly monotone for gamma >= 0.
    """
    s = np.asarray(s, dtype=float)
    if gamma < 0:
        raise ValueError(f"grading parameter must be >= 0, got {gamma}")
    if gamma == 0.0:
        return delta * (2.0 * s - 1.0)
    return delta * np.tanh(gamma * (2.0 * s - 1.0)) / np.tanh(gamma)


@dataclass
class InteriorFaces:
    """Structure-of-arrays for the interior (and periodic) faces."""

    em: np.ndarray   # minus element
    sm: np.ndarray   # minus slot
    ep: np.ndarray
    sp: np.ndarray
    flip: np.ndarray

    @property
    def n(self) -> int:
        return len(self.em)


@dataclass
class BoundaryFaces:
    elem: np.ndarray
    slot: np.ndarray
    tag: np.ndarray          # index into Mesh.tag_names

    @property
    def n(self) -> int:
        return len(self.elem)


@dataclass
class Mesh:
    vertices: np.ndarray           # (nv, 2)
    elem_vertices: np.ndarray      # (ne, 4), corner order c0..c3
    geom_degree: int
    geom_nodes: np.ndarray         # (2, mg, ne, mg) kernel layout
    interior: InteriorFaces
    boundary: BoundaryFaces
    tag_names: list
    periodic_pairs: list = field(default_factory=list)  # (fm, fp, translation)
    periodic_spec: dict = field(default_factory=dict)   # axis -> translation
    curved: dict = field(default_factory=dict)          # tag -> projector
    parent: np.ndarray = None      # coarse element index per element
    quadrant: np.ndarray = None    # 2*dy + dx within the parent
    coarser: "Mesh" = None

    @property
    def n_elements(self) -> int:
        return self.elem_vertices.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def corner_coords(self) -> np.ndarray:
        """(ne, 4, 2) physical corner coordinates."""
        return self.vertices[self.elem_vertices]

    def face_endpoints(self, elem, slot):
        a, b = SLOT_CORNERS[slot]
        return (self.elem_vertices[elem, a], self.elem_vertices[elem, b])

    def min_edge_length(self) -> float:
        c = self.corner_coords()
        d = [np.linalg.norm(c[:, a] - c[:, b], axis=1)
             for a, b in SLOT_CORNERS]
        return float(np.min(d))

    def boundary_faces_of(self, tag_name: str):
        """(elem, slot) arrays of the boundary faces carrying a tag."""
        t = self.tag_names.index(tag_name)
        sel = self.boundary.tag == t
        return self.boundary.elem[sel], self.boundary.slot[sel]

    def dump_text(self, stream):
        """Plain-text dump: one record per line, for debugging."""
        for v in self.vertices:
            stream.write(f"v {v[0]!r} {v[1]!r}\n")
        for ev in self.elem_vertices:
            stream.write(f"e {ev[0]} {ev[1]} {ev[2]} {ev[3]}\n")
        b = self.boundary
        for i in range(b.n):
            stream.write(f"bf {b.elem[i]} {b.slot[i]} "
                         f"{self.tag_names[b.tag[i]]}\n")
        f = self.interior
        for i in range(f.n):
            stream.write(f"if {f.em[i]} {f.sm[i]} {f.ep[i]} {f.sp[i]} "
                         f"{int(f.flip[i])}\n")


# ---------------------------------------------------------------------------
# connectivity

def _match_faces(vertices, elem_vertices, boundary_tagger, periodic_spec):
    """Build interior/boundary face lists from shared vertex pairs.

    boundary_tagger(xa, xb) -> tag name for an unmatched face with endpoint
    coordinates xa, xb. periodic_spec maps axis -> translation vector; faces
    on the low side are matched to the high side by translated coordinates.
    """
    ne = elem_vertices.shape[0]
    bykey = {}
    for e in range(ne):
        for s in range(4):
            a, b = SLOT_CORNERS[s]
            va, vb = elem_vertices[e, a], elem_vertices[e, b]
            key = (min(va, vb), max(va, vb))
            bykey.setdefault(key, []).append((e, s, va, vb))

    em, sm, ep, sp, flip = [], [], [], [], []
    unmatched = []
    for key, entries in bykey.items():
        if len(entries) == 2:
            (e1, s1, a1, b1), (e2, s2, a2, b2) = entries
            em.append(e1); sm.append(s1); ep.append(e2); sp.append(s2)
            flip.append(a1 != a2)
        elif len(entries) == 1:
            unmatched.append(entries[0])
        else:
            raise ValueError(f"face shared by {len(entries)} elements")

    periodic_pairs = []
    if periodic_spec:
        def coord_key(x):
            return tuple(np.round(x, 9))
        consumed = set()
        for axis, translation in periodic_spec.items():
            translation = np.asarray(translation, dtype=float)
            lows, highs = [], []
            for idx, (e, s, va, vb) in enumerate(unmatched):
                if idx in consumed:
                    continue
                xa, xb = vertices[va], vertices[vb]
                mid = 0.5 * (xa + xb)
                # a face is on the low/high side of this axis if translating
                # it (one way) lands on another unmatched face
                lows.append((idx, e, s, xa, xb))
            high_lookup = {}
            for idx, (e, s, va, vb) in enumerate(unmatched):
                if idx in consumed:
                    continue
                xa, xb = vertices[va], vertices[vb]
                high_lookup[(coord_key(xa), coord_key(xb))] = (idx, e, s)
                high_lookup[(coord_key(xb), coord_key(xa))] = (idx, e, s)
            for idx, e, s, xa, xb in lows:
                if idx in consumed:
                    continue
                ka = coord_key(xa + translation)
                kb = coord_key(xb + translation)
                hit = high_lookup.get((ka, kb))
                if hit is None or hit[0] == idx or hit[0] in consumed:
                    continue
                jdx, e2, s2 = hit
                # orientation: does the partner's first endpoint match ours?
                a2, b2 = (elem_vertices[e2, SLOT_CORNERS[s2][0]],
                          elem_vertices[e2, SLOT_CORNERS[s2][1]])
                fl = coord_key(vertices[a2]) != ka
                em.append(e); sm.append(s); ep.append(e2); sp.append(s2)
                flip.append(fl)
                periodic_pairs.append((len(em) - 1, translation.copy()))
                consumed.add(idx); consumed.add(jdx)
        unmatched = [u for i, u in enumerate(unmatched) if i not in consumed]

    be, bs, bt, names = [], [], [], []
    for e, s, va, vb in unmatched:
        name = boundary_tagger(vertices[va], vertices[vb])
        if name not in names:
            names.append(name)
        be.append(e); bs.append(s); bt.append(names.index(name))

    interior = InteriorFaces(np.array(em, dtype=int), np.array(sm, dtype=int),
                             np.array(ep, dtype=int), np.array(sp, dtype=int),
                             np.array(flip, dtype=bool))
    boundarylist = BoundaryFaces(np.array(be, dtype=int),
                                 np.array(bs, dtype=int),
                                 np.array(bt, dtype=int))
    return interior, boundarylist, names, periodic_pairs


# ---------------------------------------------------------------------------
# geometric mapping nodes

def _edge_nodes(xa, xb, params01, projector=None):
    """Nodes along one edge: straight chord, optionally projected to a curve."""
    pts = xa[None, :] + params01[:, None] * (xb - xa)[None, :]
    if projector is not None:
        pts = projector(pts)
    return pts


def _transfinite_nodes(corners, edges, params01):
    """Gordon-Hall interpolation of the element interior from edge curves.

    corners: (4, 2) in c0..c3 order; edges: dict slot -> (mg, 2) node curves;
    returns (mg, mg, 2) with axes (y-node, x-node).
    """
    s = params01[None, :, None]      # x parameter
    t = params01[:, None, None]      # y parameter
    el, er, eb, et = edges[0], edges[1], edges[2], edges[3]
    x = ((1 - t) * eb[None, :, :] + t * et[None, :, :]
         + (1 - s) * el[:, None, :] + s * er[:, None, :]
         - ((1 - s) * (1 - t) * corners[0] + s * (1 - t) * corners[1]
            + (1 - s) * t * corners[2] + s * t * corners[3]))
    return x


def compute_geom_nodes(vertices, elem_vertices, k_geo, boundary,
                       tag_names, curved):
    """Mapping nodes of all elements, projected edges on curved boundaries."""
    ne = elem_vertices.shape[0]
    mg = k_geo + 1
    params01 = 0.5 * (gll_nodes(k_geo) + 1.0)
    # which (elem, slot) has a curved edge
    proj_of = {}
    if curved:
        for i in range(boundary.n):
            name = tag_names[boundary.tag[i]]
            if name in curved:
                proj_of[(boundary.elem[i], boundary.slot[i])] = curved[name]
    nodes = np.empty((2, mg, ne, mg))
    corners_all = vertices[elem_vertices]
    for e in range(ne):
        corners = corners_all[e]
        edges = {}
        for s in range(4):
            a, b = SLOT_CORNERS[s]
            edges[s] = _edge_nodes(corners[a], corners[b], params01,
                                   proj_of.get((e, s)))
        xy = _transfinite_nodes(corners, edges, params01)
        nodes[0, :, e, :] = xy[:, :, 0]
        nodes[1, :, e, :] = xy[:, :, 1]
    return nodes


# ---------------------------------------------------------------------------
# builders

def build_box_mesh(extents, counts, grading=(0.0, 0.0), delta=1.0,
                   periodic=(False, False), k_geo=1, tag_prefix=None):
    """Tensor-product box mesh with optional tanh grading per axis.

    extents: ((x0, x1), (y0, y1)); counts: elements per axis; grading:
    gamma per axis (0 = uniform); graded axes place nodes by mapping the
    uniform parameter through grading_map scaled into the extent. The
    reference half-width delta only shapes the map; node positions are
    rescaled to the requested extents. Boundary tags are xmin, xmax, ymin,
    ymax (optionally prefixed).
    """
    (x0, x1), (y0, y1) = extents
    nx, ny = counts
    if nx < 1 or ny < 1:
        raise ValueError(f"counts must be >= 1 per axis, got {counts}")
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"extents must have positive size, got {extents}")
    g = tuple(grading)
    per = tuple(periodic)
    for axis in range(2):
        if g[axis] < 0:
            raise ValueError("grading must be >= 0")
        if per[axis] and g[axis] > 0:
            raise ValueError(
                f"axis {axis}: grading would break periodic translation "
                "matching across the wrap")

    def axis_nodes(n, gamma, lo, hi):
        s = np.linspace(0.0, 1.0, n + 1)
        f = grading_map(s, gamma, delta)
        # rescale [-delta, delta] onto [lo, hi]
        return lo + (f - f[0]) / (f[-1] - f[0]) * (hi - lo)

    xs = axis_nodes(nx, g[0], x0, x1)
    ys = axis_nodes(ny, g[1], y0, y1)
    X, Y = np.meshgrid(xs, ys)               # [iy, ix]
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(ix, iy):
        return iy * (nx + 1) + ix

    elems = np.empty((nx * ny, 4), dtype=int)
    for iy in range(ny):
        for ix in range(nx):
            e = iy * nx + ix
            elems[e] = (vid(ix, iy), vid(ix + 1, iy),
                        vid(ix, iy + 1), vid(ix + 1, iy + 1))

    pre = tag_prefix or ""
    tol = 1e-12 * max(x1 - x0, y1 - y0)

    def tagger(xa, xb):
        mid = 0.5 * (xa + xb)
        if abs(mid[0] - x0) < tol:
            return pre + "xmin"
        if abs(mid[0] - x1) < tol:
            return pre + "xmax"
        if abs(mid[1] - y0) < tol:
            return pre + "ymin"
        if abs(mid[1] - y1) < tol:
            return pre + "ymax"
        raise ValueError(f"unclassifiable boundary face at {mid}")

    pspec = {}
    if per[0]:
        pspec[0] = np.array([x1 - x0, 0.0])
    if per[1]:
        pspec[1] = np.array([0.0, y1 - y0])

    interior, bdry, names, ppairs = _match_faces(vertices, elems, tagger, pspec)
    geom = compute_geom_nodes(vertices, elems, k_geo, bdry, names, {})
    return Mesh(vertices, elems, k_geo, geom, interior, bdry, names,
                periodic_pairs=ppairs, periodic_spec=pspec)


def box_mesh_hierarchy(extents, base_counts, levels, grading=(0.0, 0.0),
                       delta=1.0, periodic=(False, False), k_geo=1):
    """Nested box meshes, base_counts * 2^l elements per axis at level l.

    Grading applies to the uniform parameter, so coarse nodes are a subset
    of fine nodes and the meshes nest exactly. Parent/quadrant links are
    filled structurally.
    """
    meshes = []
    for l in range(levels + 1):
        counts = (base_counts[0] * 2**l, base_counts[1] * 2**l)
        m = build_box_mesh(extents, counts, grading, delta, periodic, k_geo)
        if meshes:
            nx, ny = counts
            e = np.arange(nx * ny)
            ix, iy = e % nx, e // nx
            m.parent = (iy // 2) * (nx // 2) + ix // 2
            m.quadrant = (iy % 2) * 2 + ix % 2
            m.coarser = meshes[-1]
        meshes.append(m)
    return meshes


def refine(mesh: Mesh) -> Mesh:
    """Split every element into 2x2 children (reference-space quadrants).

    New boundary vertices on a curved boundary are projected onto it.
    Children of element e are stored at 4e + (2 dy + dx), and parent links
    point back to `mesh`.
    """
    verts = [v for v in mesh.vertices]
    nv = len(verts)
    # curved projector per boundary edge key
    proj_of = {}
    for i in range(mesh.boundary.n):
        name = mesh.tag_names[mesh.boundary.tag[i]]
        if name in mesh.curved:
            va, vb = mesh.face_endpoints(mesh.boundary.elem[i],
                                         mesh.boundary.slot[i])
            proj_of[(min(va, vb), max(va, vb))] = mesh.curved[name]

    edge_mid = {}

    def midpoint(va, vb):
        key = (min(va, vb), max(va, vb))
        if key not in edge_mid:
            x = 0.5 * (mesh.vertices[va] + mesh.vertices[vb])
            proj = proj_of.get(key)
            if proj is not None:
                x = proj(x[None, :])[0]
            verts.append(x)
            edge_mid[key] = len(verts) - 1
        return edge_mid[key]

    ne = mesh.n_elements
    elems = np.empty((4 * ne, 4), dtype=int)
    for e in range(ne):
        c0, c1, c2, c3 = mesh.elem_vertices[e]
        ml = midpoint(c0, c2)
        mr = midpoint(c1, c3)
        mb = midpoint(c0, c1)
        mt = midpoint(c2, c3)
        xc = (0.5 * (verts[mb] + verts[mt]) + 0.5 * (verts[ml] + verts[mr])
              - 0.25 * (verts[c0] + verts[c1] + verts[c2] + verts[c3]))
        verts.append(xc)
        cc = len(verts) - 1
        elems[4 * e + 0] = (c0, mb, ml, cc)
        elems[4 * e + 1] = (mb, c1, cc, mr)
        elems[4 * e + 2] = (ml, cc, c2, mt)
        elems[4 * e + 3] = (cc, mr, mt, c3)

    vertices = np.array(verts)

    # classify fine boundary faces by the coarse face they came from
    coarse_tag = {}
    for i in range(mesh.boundary.n):
        va, vb = mesh.face_endpoints(mesh.boundary.elem[i],
                                     mesh.boundary.slot[i])
        coarse_tag[(min(va, vb), max(va, vb))] = mesh.tag_names[
            mesh.boundary.tag[i]]

    fine_tag = {}
    for (va, vb), name in coarse_tag.items():
        m = edge_mid[(va, vb)]
        fine_tag[(min(va, m), max(va, m))] = name
        fine_tag[(min(m, vb), max(m, vb))] = name

    elem_lookup = {}
    for e in range(4 * ne):
        for s in range(4):
            a, b = SLOT_CORNERS[s]
            va, vb = elems[e, a], elems[e, b]
            elem_lookup[(min(va, vb), max(va, vb))] = None

    def tagger(xa, xb):
        # recover the vertex pair from coordinates via exact id match
        raise RuntimeError  # replaced below

    # match faces first without tagging, then assign tags by vertex pair
    def tagger(xa, xb):
        return "__pending__"

    interior, bdry, names, ppairs = _match_faces(
        vertices, elems, tagger, mesh.periodic_spec)
    tags = []
    tag_names = []
    for i in range(bdry.n):
        va, vb = elems[bdry.elem[i], SLOT_CORNERS[bdry.slot[i]][0]], \
                 elems[bdry.elem[i], SLOT_CORNERS[bdry.slot[i]][1]]
        name = fine_tag[(min(va, vb), max(va, vb))]
        if name not in tag_names:
            tag_names.append(name)
        tags.append(tag_names.index(name))
    bdry = BoundaryFaces(bdry.elem, bdry.slot, np.array(tags, dtype=int))

    geom = compute_geom_nodes(vertices, elems, mesh.geom_degree, bdry,
                              tag_names, mesh.curved)
    fine = Mesh(vertices, elems, mesh.geom_degree, geom, interior, bdry,
                tag_names, periodic_pairs=ppairs,
                periodic_spec=dict(mesh.periodic_spec),
                curved=dict(mesh.curved))
    fine.parent = np.repeat(np.arange(ne), 4)
    fine.quadrant = np.tile(np.arange(4), ne)
    fine.coarser = mesh
    return fine
