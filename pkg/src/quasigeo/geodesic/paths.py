"""Single-pair quasi-geodesic paths and discrete geodesic curvature."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph

from ..errors import (
    Disconnected,
    EndpointNode,
    IndexOutOfRange,
    InvalidEndpoints,
    NonManifoldMesh,
    UnreferencedVertex,
    ZeroTotalAngle,
)
from ..mesh import TriangleMesh
from . import _kernel

DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 100


@dataclass(frozen=True)
class PathNode:
    """A mesh vertex (``edge is None``) or a point on edge ``edge`` at
    ``(1 - t) * edge[0] + t * edge[1]``."""

    vertex: int | None = None
    edge: tuple | None = None
    t: float = 0.0

    @property
    def is_vertex(self) -> bool:
        return self.edge is None

    def position(self, mesh: TriangleMesh) -> np.ndarray:
        v = mesh.vertices
        if self.edge is None:
            return v[self.vertex].copy()
        a, b = self.edge
        return (1.0 - self.t) * v[a] + self.t * v[b]


@dataclass(frozen=True)
class SurfacePath:
    endpoints: tuple
    nodes: tuple
    length: float
    converged: bool = True
    iterations: int = 0

    def positions(self, mesh: TriangleMesh) -> np.ndarray:
        return np.array([n.position(mesh) for n in self.nodes])

    def vertex_nodes(self):
        return [n.vertex for n in self.nodes if n.is_vertex]


@dataclass(frozen=True)
class CrossingAngles:
    theta_left: float
    theta_right: float
    theta_total: float


def _fan_arrays(mesh):
    f = mesh.fans
    return f.ptr, f.spokes, f.cum, f.closed, f.ok


def _tokens(path: SurfacePath):
    n = len(path.nodes)
    ta = np.empty(n, dtype=np.int64)
    tb = np.empty(n, dtype=np.int64)
    tt = np.zeros(n)
    for k, node in enumerate(path.nodes):
        if node.is_vertex:
            ta[k] = node.vertex
            tb[k] = _kernel.PIN
        else:
            ta[k], tb[k] = node.edge
            tt[k] = node.t
    return ta, tb, tt


def _nodes(ta, tb, tt):
    return tuple(
        PathNode(vertex=int(a)) if b < 0 else PathNode(edge=(int(a), int(b)), t=float(t))
        for a, b, t in zip(ta, tb, tt)
    )


def _check_vertex(mesh, v, what):
    if not 0 <= v < mesh.n:
        raise IndexOutOfRange(f"{what} vertex {v} outside [0, {mesh.n})")
    if not mesh.referenced[v]:
        raise UnreferencedVertex(f"{what} vertex {v} is not used by any face")


def initial_path(mesh: TriangleMesh, src: int, dst: int) -> SurfacePath:
    """Dijkstra shortest path along mesh edges, weighted by edge length."""
    if src == dst:
        raise InvalidEndpoints(f"source and target are both vertex {src}")
    _check_vertex(mesh, src, "source")
    _check_vertex(mesh, dst, "target")
    dist, pred = csgraph.dijkstra(
        mesh.edge_graph, directed=False, indices=src, return_predecessors=True
    )
    if not np.isfinite(dist[dst]):
        raise Disconnected(f"vertices {src} and {dst} lie in different components")
    verts = [dst]
    while verts[-1] != src:
        verts.append(int(pred[verts[-1]]))
    verts.reverse()
    nodes = tuple(PathNode(vertex=v) for v in verts)
    pos = mesh.vertices[verts]
    length = float(np.linalg.norm(np.diff(pos, axis=0), axis=1).sum())
    return SurfacePath((src, dst), nodes, length, converged=False, iterations=0)


def discrete_geodesic_curvature(crossing: CrossingAngles) -> float:
    """Tangential turning of the path at a node: ``(2 pi / theta) (theta / 2 - theta_r)``."""
    theta = crossing.theta_total
    if not theta > 0.0:
        raise ZeroTotalAngle(f"total angle {theta} is not positive")
    return (2.0 * math.pi / theta) * (theta / 2.0 - crossing.theta_right)


def crossing_angles(mesh: TriangleMesh, path: SurfacePath, node_index: int) -> CrossingAngles:
    """Split the angle around an interior path node into its two sides.

    For a vertex node the full fan is split by the incoming and outgoing
    segments; for an edge crossing the two faces on either side of the
    crossed edge contribute ``pi`` each.  *Right* is the side swept when
    turning counter-clockwise (with respect to the face winding) from the
    incoming to the outgoing direction.
    """
    n = len(path.nodes)
    if node_index <= 0 or node_index >= n - 1:
        raise EndpointNode(f"node {node_index} is an endpoint of a {n}-node path")
    ta, tb, tt = _tokens(path)
    k = node_index
    node = path.nodes[k]
    if node.is_vertex:
        res = _kernel.pin_angles(
            mesh.vertices, *_fan_arrays(mesh), int(ta[k]),
            ta[k - 1], tb[k - 1], tt[k - 1], ta[k + 1], tb[k + 1], tt[k + 1],
        )
        ok, side_fwd, side_bwd, _, _, theta = res[:6]
        if not ok:
            raise NonManifoldMesh(
                f"vertex {node.vertex} has no single fan containing both path segments"
            )
        return CrossingAngles(theta_left=side_bwd, theta_right=side_fwd, theta_total=theta)
    return _edge_crossing_angles(mesh, path.nodes[k - 1], node, path.nodes[k + 1])


def _edge_crossing_angles(mesh, prev, node, nxt):
    u, w = node.edge
    v = mesh.vertices
    x = node.position(mesh)
    p = prev.position(mesh)
    q = nxt.position(mesh)
    faces = _faces_of_edge(mesh, u, w)
    f_in = _face_holding(mesh, faces, prev)
    if f_in is None:
        raise NonManifoldMesh(f"no face of edge {node.edge} holds the previous node")

    def ang(a, b):
        c = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
        return float(np.arccos(np.clip(c, -1.0, 1.0)))

    side_u = ang(v[u] - x, p - x) + ang(v[u] - x, q - x)
    side_w = 2.0 * math.pi - side_u
    tri = mesh.faces[f_in]
    normal = np.cross(v[tri[1]] - v[tri[0]], v[tri[2]] - v[tri[0]])
    u_on_left = np.dot(np.cross(normal, x - p), v[u] - x) > 0.0
    if u_on_left:
        return CrossingAngles(theta_left=side_u, theta_right=side_w, theta_total=2.0 * math.pi)
    return CrossingAngles(theta_left=side_w, theta_right=side_u, theta_total=2.0 * math.pi)


def _faces_of_edge(mesh, u, w):
    f = mesh.faces
    return np.flatnonzero(((f == u) | (f == w)).sum(axis=1) == 2)


def _face_holding(mesh, faces, node):
    need = {node.vertex} if node.is_vertex else set(node.edge)
    for fi in faces:
        if need <= set(mesh.faces[fi].tolist()):
            return int(fi)
    return None


def straighten(mesh: TriangleMesh, path: SurfacePath, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER) -> SurfacePath:
    """Shorten ``path`` into a quasi-geodesic.

    Corridors of crossed edges are unfolded and replaced by the straight
    (funnel) path; pins whose smaller traversable angle sum is below
    ``pi - tol`` are rerouted around that side.  Stops when no pin can be
    shortened or after ``max_iter`` passes.  The result is never longer
    than the input.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    ta, tb, tt = _tokens(path)
    if len(ta) < 2 or tb[0] >= 0 or tb[-1] >= 0:
        raise InvalidEndpoints("a path must start and end at mesh vertices")
    if len(ta) == 2:
        return SurfacePath(path.endpoints, path.nodes, float(_kernel.path_length(
            mesh.vertices, ta, tb, tt)), True, 0)
    ra, rb, rt, length, converged, passes = _kernel.straighten_tokens(
        mesh.vertices, *_fan_arrays(mesh), ta, tb, tt, float(tol), int(max_iter)
    )
    return SurfacePath(path.endpoints, _nodes(ra, rb, rt), float(length), bool(converged), int(passes))


def quasi_geodesic(mesh: TriangleMesh, src: int, dst: int, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER) -> SurfacePath:
    """``straighten(initial_path(src, dst))``."""
    return straighten(mesh, initial_path(mesh, src, dst), tol, max_iter)


def max_curvature(mesh: TriangleMesh, path: SurfacePath) -> float:
    """Largest ``|kappa_g|`` over the interior nodes of ``path``."""
    worst = 0.0
    for k in range(1, len(path.nodes) - 1):
        kg = discrete_geodesic_curvature(crossing_angles(mesh, path, k))
        worst = max(worst, abs(kg))
    return worst
