"""Small synthetic meshes with known geometry, used by tests and demos."""

import numpy as np

from .mesh import TriangleMesh


def tetrahedron(edge=1.0):
    """Regular tetrahedron with the given edge length."""
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    v *= edge / np.sqrt(8.0)
    f = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]
    return TriangleMesh(v, f, "tetrahedron")


def icosphere(subdivisions=3, radius=1.0):
    """Icosahedron refined by midpoint subdivision and projected to a sphere.

    ``subdivisions=3`` gives 642 vertices.
    """
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ]
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [np.array(p, dtype=float) / np.linalg.norm(p) for p in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = refined
    return TriangleMesh(radius * np.array(verts), faces, f"icosphere{subdivisions}")


def cube_grid(n=8, size=1.0):
    """Surface of an axis-aligned cube ``[0, size]^3``, each face an ``n x n`` grid.

    Vertex count is ``6 n^2 + 2``.
    """
    index = {}
    verts = []

    def vid(p):
        key = tuple(int(round(c)) for c in p)
        if key not in index:
            index[key] = len(verts)
            verts.append(key)
        return index[key]

    faces = []
    # each face: fixed axis, fixed side, two in-plane axes ordered for outward normals
    for axis in range(3):
        u, w = (axis + 1) % 3, (axis + 2) % 3
        for side in (0, n):
            for i in range(n):
                for j in range(n):
                    quad = []
                    for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        p = [0, 0, 0]
                        p[axis] = side
                        p[u] = i + di
                        p[w] = j + dj
                        quad.append(vid(p))
                    a, b, c, d = quad
                    if side == 0:
                        a, b, c, d = a, d, c, b
                    faces += [[a, b, c], [a, c, d]]
    v = np.array(verts, dtype=float) * (size / n)
    return TriangleMesh(v, faces, f"cube{n}")


def hexagon_fan(edge=1.0):
    """Flat fan of six equilateral triangles around vertex 0."""
    ang = np.arange(6) * np.pi / 3
    v = np.vstack([[0, 0, 0], np.stack([np.cos(ang), np.sin(ang), np.zeros(6)], 1)]) * edge
    f = [[0, 1 + i, 1 + (i + 1) % 6] for i in range(6)]
    return TriangleMesh(v, f, "hexfan")


def square_pyramid(edge=1.0):
    """Closed square pyramid whose four side faces are equilateral; apex is vertex 0."""
    h = edge / np.sqrt(2.0)
    s = edge / 2.0
    v = [[0, 0, h], [s, s, 0], [-s, s, 0], [-s, -s, 0], [s, -s, 0]]
    f = [[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1], [1, 3, 2], [1, 4, 3]]
    return TriangleMesh(np.array(v, dtype=float), f, "pyramid")


def unit_square():
    """Two triangles covering the unit square, diagonal 0-2."""
    v = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
    return TriangleMesh(np.array(v, dtype=float), [[0, 1, 2], [0, 2, 3]], "square")


def grid_strip(nx=8, ny=3, width=4.0, height=1.0, jitter=0.0, seed=0):
    """Planar rectangle ``[0, width] x [0, height]`` triangulated on a grid.

    ``jitter`` perturbs interior vertices in-plane by up to that fraction of
    a cell, keeping the surface flat.
    """
    xs = np.linspace(0, width, nx + 1)
    ys = np.linspace(0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    v = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], 1)
    if jitter:
        rng = np.random.default_rng(seed)
        interior = (X.ravel() > 0) & (X.ravel() < width) & (Y.ravel() > 0) & (Y.ravel() < height)
        step = np.array([width / nx, height / ny])
        v[interior, :2] += rng.uniform(-jitter, jitter, (interior.sum(), 2)) * step
    idx = np.arange(v.shape[0]).reshape(nx + 1, ny + 1)
    f = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            f += [[a, b, c], [a, c, d]]
    return TriangleMesh(v, f, "strip")


def _tube_param(n_around, n_along, length):
    phi = 2 * np.pi * np.arange(n_around) / n_around
    s = np.linspace(0.0, length, n_along + 1)
    S, P = np.meshgrid(s, phi, indexing="ij")
    f = []
    for i in range(n_along):
        for j in range(n_around):
            a = i * n_around + j
            b = i * n_around + (j + 1) % n_around
            c = (i + 1) * n_around + (j + 1) % n_around
            d = (i + 1) * n_around + j
            f += [[a, b, c], [a, c, d]] if (i + j) % 2 == 0 else [[a, b, d], [b, c, d]]
    return S.ravel(), P.ravel(), f


def cylinder(n_around=16, n_along=24, radius=0.25, length=4.0):
    """Open tube along +z; vertex ``i * n_around + j`` is ring ``i``, angle ``j``."""
    S, P, f = _tube_param(n_around, n_along, length)
    v = np.stack([radius * np.cos(P), radius * np.sin(P), S], 1)
    return TriangleMesh(v, f, "cylinder")


def bent_cylinder(n_around=16, n_along=24, radius=0.25, length=4.0,
                  bend_start=1.5, bend_length=1.0, angle=np.pi / 2):
    """The tube of :func:`cylinder` with its centreline bent by ``angle``.

    The centreline keeps its arc length: it runs straight up to ``bend_start``,
    follows a circular arc of length ``bend_length`` and continues straight.
    Cross-sections stay circles of ``radius`` normal to the centreline, so the
    inner side of the bend is compressed and the outer side stretched.
    """
    S, P, f = _tube_param(n_around, n_along, length)
    R = bend_length / angle
    centre = np.zeros((S.size, 3))
    normal = np.zeros((S.size, 3))
    binormal = np.tile([0.0, 1.0, 0.0], (S.size, 1))
    for k, s in enumerate(S):
        if s <= bend_start:
            centre[k] = [0, 0, s]
            a = 0.0
        elif s <= bend_start + bend_length:
            a = (s - bend_start) / R
            centre[k] = [R * (1 - np.cos(a)), 0, bend_start + R * np.sin(a)]
        else:
            a = angle
            end = np.array([R * (1 - np.cos(a)), 0, bend_start + R * np.sin(a)])
            rest = s - bend_start - bend_length
            centre[k] = end + rest * np.array([np.sin(a), 0, np.cos(a)])
        normal[k] = [np.cos(a), 0, -np.sin(a)]
    v = centre + radius * (np.cos(P)[:, None] * normal + np.sin(P)[:, None] * binormal)
    return TriangleMesh(v, f, "bent_cylinder")


def perturbed(mesh, scale=0.02, seed=0, name=None):
    """Copy of ``mesh`` with vertices displaced by a seeded uniform jitter."""
    rng = np.random.default_rng(seed)
    span = np.ptp(mesh.vertices, axis=0).max()
    v = mesh.vertices + rng.uniform(-scale, scale, mesh.vertices.shape) * span
    return TriangleMesh(v, mesh.faces, name or mesh.name)


def random_rotation(seed=0):
    """Proper rotation matrix from a seeded QR factorisation."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
