"""Curved mesh for the laminar flow-past-cylinder benchmark.

Channel of 2.2 x 0.41 with a cylinder of diameter 0.1 centered at
(0.2, 0.2). The coarsest level has 136 elements: a two-layer O-grid collar
of 16 sectors between the cylinder surface and the square with half-width
0.15 around the center, embedded in a tensor grid that fills the rest of
the channel (one inflow column, the strips below/above the square, and a
15-column wake block). Every refinement splits each element in four;
boundary nodes and vertices on the cylinder are projected back onto the
circle, so the curved geometry is preserved on all levels.

Boundary tags: inflow (x=0), outflow (x=2.2), wall (y=0 and y=0.41),
cylinder (the circle).
"""

import numpy as np

from .mesh import (BoundaryFaces, Mesh, compute_geom_nodes, _match_faces,
                   refine)

WIDTH = 2.2
HEIGHT = 0.41
CENTER = np.array([0.2, 0.2])
RADIUS = 0.05
_COLLAR_HALF = 0.15
_SECTORS = 16
_WAKE_COLUMNS = 15


def circle_projector(points):
    p = np.atleast_2d(points) - CENTER
    return CENTER + RADIUS * p / np.linalg.norm(p, axis=-1, keepdims=True)


def _square_boundary_points():
    """16 points CCW on the collar square, starting at the (-,-) corner."""
    a = _COLLAR_HALF
    t = np.linspace(-a, a, 5)
    pts = []
    pts += [(x, -a) for x in t[:-1]]          # bottom, left to right
    pts += [(a, y) for y in t[:-1]]           # right, bottom to top
    pts += [(x, a) for x in t[::-1][:-1]]     # top, right to left
    pts += [(-a, y) for y in t[::-1][:-1]]    # left, top to bottom
    return CENTER + np.array(pts)


def build_cylinder_mesh(level: int = 0, k_geo: int = 4) -> Mesh:
    """Benchmark mesh at the given refinement level (>= 0)."""
    if level < 0:
        raise ValueError(f"refinement level must be >= 0, got {level}")

    # grid lines of the filler region
    a = _COLLAR_HALF
    xs = np.concatenate([
        [0.0], CENTER[0] + np.linspace(-a, a, 5),
        np.linspace(CENTER[0] + a, WIDTH, _WAKE_COLUMNS + 1)[1:]])
    ys = np.concatenate([
        [0.0], CENTER[1] + np.linspace(-a, a, 5), [HEIGHT]])
    nx, ny = len(xs) - 1, len(ys) - 1

    verts = []
    grid_vid = {}
    for iy in range(ny + 1):
        for ix in range(nx + 1):
            grid_vid[(ix, iy)] = len(verts)
            verts.append((xs[ix], ys[iy]))

    elems = []
    for iy in range(ny):
        for ix in range(nx):
            if 1 <= ix <= 4 and 1 <= iy <= 4:
                continue  # collar region
            elems.append((grid_vid[(ix, iy)], grid_vid[(ix + 1, iy)],
                          grid_vid[(ix, iy + 1)], grid_vid[(ix + 1, iy + 1)]))

    # collar rings: circle -> mid -> square, 16 sectors
    sq_pts = _square_boundary_points()
    sq_vid = []
    for p in sq_pts:
        ix = int(np.argmin(np.abs(xs - p[0])))
        iy = int(np.argmin(np.abs(ys - p[1])))
        sq_vid.append(grid_vid[(ix, iy)])
    theta = -0.75 * np.pi + 2.0 * np.pi * np.arange(_SECTORS) / _SECTORS
    circle_pts = CENTER + RADIUS * np.stack([np.cos(theta), np.sin(theta)], 1)
    ci_vid, mid_vid = [], []
    for j in range(_SECTORS):
        ci_vid.append(len(verts)); verts.append(tuple(circle_pts[j]))
        mid = 0.5 * (circle_pts[j] + sq_pts[j])
        mid_vid.append(len(verts)); verts.append(tuple(mid))
    for j in range(_SECTORS):
        jn = (j + 1) % _SECTORS
        # local xi = radial (outward), eta = angular (counterclockwise)
        elems.append((ci_vid[j], mid_vid[j], ci_vid[jn], mid_vid[jn]))
        elems.append((mid_vid[j], sq_vid[j], mid_vid[jn], sq_vid[jn]))

    vertices = np.array(verts)
    elem_vertices = np.array(elems, dtype=int)

    # drop the unused grid vertices inside the collar square
    used = np.zeros(len(vertices), dtype=bool)
    used[elem_vertices.ravel()] = True
    remap = -np.ones(len(vertices), dtype=int)
    remap[used] = np.arange(used.sum())
    vertices = vertices[used]
    elem_vertices = remap[elem_vertices]

    tol = 1e-9

    def tagger(xa, xb):
        mid = 0.5 * (np.asarray(xa) + np.asarray(xb))
        if (abs(np.linalg.norm(xa - CENTER) - RADIUS) < tol
                and abs(np.linalg.norm(xb - CENTER) - RADIUS) < tol):
            return "cylinder"
        if abs(mid[0]) < tol:
            return "inflow"
        if abs(mid[0] - WIDTH) < tol:
            return "outflow"
        if abs(mid[1]) < tol or abs(mid[1] - HEIGHT) < tol:
            return "wall"
        raise ValueError(f"unclassifiable boundary face at {mid}")

    interior, bdry, names, _ = _match_faces(vertices, elem_vertices, tagger, {})
    curved = {"cylinder": circle_projector}
    geom = compute_geom_nodes(vertices, elem_vertices, k_geo, bdry, names,
                              curved)
    mesh = Mesh(vertices, elem_vertices, k_geo, geom, interior, bdry, names,
                curved=curved)
    for _ in range(level):
        mesh = refine(mesh)
    return mesh


def cylinder_mesh_hierarchy(level: int, k_geo: int = 4):
    """Coarse-to-fine list of meshes with parent links, for multigrid."""
    meshes = [build_cylinder_mesh(0, k_geo)]
    for _ in range(level):
        meshes.append(refine(meshes[-1]))
    return meshes
