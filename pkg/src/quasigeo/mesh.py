"""Triangle meshes: loading, validation, vertex fans and scalar-field export.

Supported on-disk formats are ascii OFF, ascii PLY and the TOSCA pair of
``.vert``/``.tri`` files (whitespace separated, 1-based face indices).
"""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import IndexOutOfRange, NonFiniteField, ParseError, UnreferencedVertex

logger = logging.getLogger(__name__)

FORMATS = ("OFF", "PLY-ascii", "TOSCA-vert-tri", "auto")

#: Diverging colour ramp used by :func:`write_scalar_field`.  Field values are
#: min-max normalised to [0, 1] and linearly interpolated between these stops.
COLOR_RAMP = (
    (0.0, (59, 76, 192)),
    (0.5, (221, 221, 221)),
    (1.0, (180, 4, 38)),
)

_DEGENERATE_RANGE = 1e-12
_ZERO_AREA_REL = 1e-12


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Immutable triangulated surface.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
        Vertex positions.
    faces : array_like, shape (m, 3)
        Vertex-index triples, 0-based.
    name : str
        Free-form label, carried into reports.
    """

    vertices: np.ndarray
    faces: np.ndarray
    name: str = ""

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64, copy=True)
        f = np.array(self.faces, dtype=np.int64, copy=True)
        if f.size == 0:
            f = f.reshape(0, 3)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"vertices must have shape (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError(f"faces must have shape (m, 3), got {f.shape}")
        if f.size:
            bad = np.flatnonzero((f < 0).any(axis=1) | (f >= len(v)).any(axis=1))
            if bad.size:
                k = int(bad[0])
                raise IndexOutOfRange(
                    f"face {k} {f[k].tolist()} references a vertex outside [0, {len(v)})"
                )
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def face_count(self) -> int:
        return len(self.faces)

    @cached_property
    def fingerprint(self) -> str:
        """SHA-256 over the little-endian vertex and face buffers."""
        h = hashlib.sha256()
        h.update(np.int64(self.n).astype("<i8").tobytes())
        h.update(self.vertices.astype("<f8").tobytes())
        h.update(self.faces.astype("<i8").tobytes())
        return h.hexdigest()

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges, shape (E, 2), each row sorted, rows sorted."""
        e = np.sort(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0) if len(e) else e.reshape(0, 2)

    @cached_property
    def edge_face_counts(self) -> np.ndarray:
        e = np.sort(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        if not len(e):
            return np.zeros(0, dtype=np.int64)
        _, counts = np.unique(e, axis=0, return_counts=True)
        return counts

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    @cached_property
    def face_areas(self) -> np.ndarray:
        v = self.vertices
        f = self.faces
        cr = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        return 0.5 * np.linalg.norm(cr, axis=1)

    @property
    def surface_area(self) -> float:
        return float(self.face_areas.sum())

    @cached_property
    def edge_graph(self) -> sparse.csr_matrix:
        """Symmetric sparse adjacency weighted by Euclidean edge length."""
        e = self.edges
        w = self.edge_lengths
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return sparse.csr_matrix(
            (np.concatenate([w, w]), (rows, cols)), shape=(self.n, self.n)
        )

    @cached_property
    def referenced(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.faces.ravel()] = True
        return mask

    @cached_property
    def fans(self) -> "FanTable":
        return build_fans(self)

    def transformed(self, rotation=None, translation=None, permutation=None, name=None):
        """Return a copy under a rigid motion and/or a vertex relabelling.

        ``permutation[i]`` is the new label of old vertex ``i``.
        """
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=float).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=float)
        f = self.faces
        if permutation is not None:
            perm = np.asarray(permutation, dtype=np.int64)
            nv = np.empty_like(v)
            nv[perm] = v
            v = nv
            f = perm[f]
        return TriangleMesh(v, f, self.name if name is None else name)


@dataclass(frozen=True)
class ValidationReport:
    vertex_count: int
    face_count: int
    boundary_edge_count: int
    non_manifold_edge_count: int
    connected_component_count: int
    degenerate_face_list: tuple = ()
    unreferenced_vertex_count: int = 0

    @property
    def ok(self) -> bool:
        return (
            self.non_manifold_edge_count == 0
            and not self.degenerate_face_list
            and self.unreferenced_vertex_count == 0
        )


@dataclass(frozen=True)
class VertexFan:
    center: int
    incident_angles: tuple
    total_angle: float
    closed: bool = True
    manifold: bool = True


@dataclass(frozen=True)
class FanTable:
    """Ordered one-ring of every vertex in flat (CSR) arrays.

    For vertex ``v`` the slice ``ptr[v]:ptr[v+1]`` of ``spokes`` lists the
    neighbours in circulation order; slot ``i`` is the face between spokes
    ``i`` and ``i + 1``.  Closed fans repeat the first spoke at the end, so a
    vertex with ``m`` faces always has ``m + 1`` spoke entries.  ``cum`` holds
    the cumulative corner angle at each spoke, starting at 0.
    """

    ptr: np.ndarray
    spokes: np.ndarray
    cum: np.ndarray
    closed: np.ndarray
    ok: np.ndarray


def _corner_angle(origin, a, b):
    u = a - origin
    w = b - origin
    c = np.dot(u, w) / (np.linalg.norm(u) * np.linalg.norm(w))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def build_fans(mesh: TriangleMesh) -> FanTable:
    n = mesh.n
    v = mesh.vertices
    # corners[c] -> list of (a, b) in face winding order c -> a -> b
    corners = [[] for _ in range(n)]
    for i, j, k in mesh.faces.tolist():
        corners[i].append((j, k))
        corners[j].append((k, i))
        corners[k].append((i, j))

    ptr = np.zeros(n + 1, dtype=np.int64)
    spokes, cums = [], []
    closed = np.zeros(n, dtype=bool)
    ok = np.zeros(n, dtype=bool)
    for c in range(n):
        order, is_closed, is_ok = _order_ring(corners[c])
        if is_ok:
            cum = [0.0]
            for a, b in zip(order[:-1], order[1:]):
                cum.append(cum[-1] + _corner_angle(v[c], v[a], v[b]))
            spokes.extend(order)
            cums.extend(cum)
            closed[c] = is_closed
            ok[c] = True
        ptr[c + 1] = len(spokes)
    return FanTable(
        ptr=ptr,
        spokes=np.asarray(spokes, dtype=np.int64),
        cum=np.asarray(cums, dtype=np.float64),
        closed=closed,
        ok=ok,
    )


def _order_ring(ring):
    """Chain the opposite edges of a vertex's faces into one path or cycle.

    Returns ``(spokes, closed, ok)``; ``ok`` is False for non-manifold rings.
    """
    if not ring:
        return [], False, False
    adj = {}
    for a, b in ring:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    for nbrs in adj.values():
        if len(nbrs) > 2 or len(set(nbrs)) != len(nbrs):
            return [], False, False
    forward = {}
    for a, b in ring:
        forward.setdefault(a, b)
    ends = sorted(s for s, nbrs in adj.items() if len(nbrs) == 1)
    if len(ends) == 2:
        wound = [e for e in ends if e in forward]
        start = wound[0] if wound else ends[0]
        step = adj[start][0]
    elif not ends:
        start = min(adj)
        step = forward.get(start, min(adj[start]))
    else:
        return [], False, False
    order = [start, step]
    prev, cur = start, step
    for _ in range(len(ring) - 1):
        nbrs = adj[cur]
        if len(nbrs) == 1:
            break
        nxt = nbrs[0] if nbrs[1] == prev else nbrs[1]
        order.append(nxt)
        prev, cur = cur, nxt
    is_closed = not ends
    if is_closed:
        if order[-1] != start or len(order) != len(ring) + 1:
            return [], False, False
        if len(set(order)) != len(ring):
            return [], False, False
    elif len(order) != len(ring) + 1 or len(set(order)) != len(order):
        return [], False, False
    return order, is_closed, True


# ---------------------------------------------------------------------------
# loading


def load_mesh(path, format: str = "auto") -> TriangleMesh:
    """Read a mesh from disk.

    ``format`` is one of ``"OFF"``, ``"PLY-ascii"``, ``"TOSCA-vert-tri"`` or
    ``"auto"`` (by extension; a path without extension resolves to a TOSCA
    pair if ``<path>.vert`` exists).
    """
    if format not in FORMATS:
        raise ValueError(f"unknown mesh format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    fmt = format
    if fmt == "auto":
        fmt = _sniff_format(path)
    if fmt == "TOSCA-vert-tri":
        vert_path, tri_path = _tosca_paths(path)
        for p in (vert_path, tri_path):
            if not p.exists():
                raise FileNotFoundError(str(p))
        verts, faces = _read_tosca(vert_path, tri_path)
        name = vert_path.stem
    else:
        if not path.exists():
            raise FileNotFoundError(str(path))
        reader = _read_off if fmt == "OFF" else _read_ply
        verts, faces = reader(path)
        name = path.stem
    mesh = TriangleMesh(verts, faces, name)
    _reject_degenerate(mesh, path)
    logger.debug("loaded %s: %d vertices, %d faces", name, mesh.n, mesh.face_count)
    return mesh


def _sniff_format(path: Path) -> str:
    ext = path.suffix.lower()
    if ext == ".off":
        return "OFF"
    if ext == ".ply":
        return "PLY-ascii"
    if ext in (".vert", ".tri"):
        return "TOSCA-vert-tri"
    if Path(str(path) + ".vert").exists():
        return "TOSCA-vert-tri"
    if path.exists():
        with open(path, "rb") as fh:
            head = fh.read(4)
        if head.startswith(b"ply"):
            return "PLY-ascii"
        if head.startswith(b"OFF"):
            return "OFF"
    raise ParseError("cannot infer mesh format", path=path)


def _tosca_paths(path: Path):
    base = path.with_suffix("") if path.suffix.lower() in (".vert", ".tri") else path
    return Path(str(base) + ".vert"), Path(str(base) + ".tri")


def _data_lines(path: Path):
    """Yield (line_number, tokens) for non-empty, non-comment lines."""
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def _floats(tokens, lineno, path, count=None):
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        raise ParseError(f"expected numbers, got {' '.join(tokens)!r}", lineno, path) from None
    if count is not None and len(vals) < count:
        raise ParseError(f"expected {count} values, got {len(vals)}", lineno, path)
    if not np.all(np.isfinite(vals)):
        raise ParseError("non-finite coordinate", lineno, path)
    return vals


def _ints(tokens, lineno, path):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ParseError(f"expected integers, got {' '.join(tokens)!r}", lineno, path) from None


def _check_face(face, n, k, lineno, path):
    for idx in face:
        if idx < 0 or idx >= n:
            raise IndexOutOfRange(
                f"{path}:{lineno}: face {k} {list(face)} references vertex {idx} "
                f"outside [0, {n})"
            )


def _read_off(path: Path):
    lines = _data_lines(path)
    try:
        lineno, tok = next(lines)
    except StopIteration:
        raise ParseError("empty file", path=path) from None
    if not tok[0].upper().endswith("OFF"):
        raise ParseError(f"missing OFF header, got {tok[0]!r}", lineno, path)
    if tok[0].upper() != "OFF":
        raise ParseError(f"unsupported OFF variant {tok[0]!r}", lineno, path)
    tok = tok[1:]
    if not tok:
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise ParseError("missing counts line", path=path) from None
    counts = _ints(tok, lineno, path)
    if len(counts) < 2:
        raise ParseError("counts line needs vertex and face counts", lineno, path)
    nv, nf = counts[0], counts[1]
    verts = []
    for _ in range(nv):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise ParseError(f"file ends after {len(verts)} of {nv} vertices", path=path) from None
        verts.append(_floats(tok, lineno, path, 3)[:3])
    faces = []
    for k in range(nf):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise ParseError(f"file ends after {len(faces)} of {nf} faces", path=path) from None
        vals = _ints(tok, lineno, path)
        if vals[0] != 3 or len(vals) < 4:
            raise ParseError("only triangular faces are supported", lineno, path)
        face = vals[1:4]
        _check_face(face, nv, k, lineno, path)
        faces.append(face)
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def _read_ply(path: Path):
    with open(path, "rb") as fh:
        raw = fh.read()
    text = raw.decode("ascii", errors="replace").splitlines()
    if not text or text[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", 1, path)
    elements = []  # (name, count, [(prop_name, is_list)])
    header_end = None
    for i, line in enumerate(text[1:], start=2):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] != "ascii":
                raise ParseError(f"only ascii PLY is supported, got {' '.join(tok[1:])!r}", i, path)
        elif tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise ParseError("property before element", i, path)
            if tok[1] == "list":
                elements[-1][2].append((tok[-1], True))
            else:
                elements[-1][2].append((tok[-1], False))
        elif tok[0] == "end_header":
            header_end = i
            break
    if header_end is None:
        raise ParseError("missing end_header", path=path)

    verts, faces = None, None
    nv = 0
    lineno = header_end
    body = iter(enumerate(text[header_end:], start=header_end + 1))

    def next_line():
        for ln, line in body:
            if line.strip():
                return ln, line.split()
        raise ParseError("unexpected end of file", path=path)

    for name, count, props in elements:
        if name == "vertex":
            names = [p for p, _ in props]
            try:
                ix = [names.index(c) for c in ("x", "y", "z")]
            except ValueError:
                raise ParseError("vertex element lacks x/y/z", path=path) from None
            verts = np.empty((count, 3))
            for r in range(count):
                lineno, tok = next_line()
                vals = _floats(tok, lineno, path, len(props))
                verts[r] = [vals[j] for j in ix]
            nv = count
        elif name == "face":
            faces = np.empty((count, 3), dtype=np.int64)
            for r in range(count):
                lineno, tok = next_line()
                vals = _ints(tok, lineno, path)
                if vals[0] != 3 or len(vals) < 4:
                    raise ParseError("only triangular faces are supported", lineno, path)
                _check_face(vals[1:4], nv, r, lineno, path)
                faces[r] = vals[1:4]
        else:
            for _ in range(count):
                next_line()
    if verts is None or faces is None:
        raise ParseError("PLY needs vertex and face elements", path=path)
    return verts, faces


def _read_tosca(vert_path: Path, tri_path: Path):
    verts = [_floats(tok, ln, vert_path, 3)[:3] for ln, tok in _data_lines(vert_path)]
    nv = len(verts)
    faces = []
    for k, (ln, tok) in enumerate(_data_lines(tri_path)):
        vals = _ints(tok, ln, tri_path)
        if len(vals) < 3:
            raise ParseError("face line needs three indices", ln, tri_path)
        face = [x - 1 for x in vals[:3]]
        _check_face(face, nv, k, ln, tri_path)
        faces.append(face)
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def _degenerate_faces(mesh: TriangleMesh):
    f = mesh.faces
    if not len(f):
        return np.zeros(0, dtype=np.int64)
    repeated = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
    v = mesh.vertices
    e = np.stack([v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 1]], v[f[:, 0]] - v[f[:, 2]]], axis=1)
    longest = np.max(np.einsum("fij,fij->fi", e, e), axis=1)
    zero_area = 2.0 * mesh.face_areas <= _ZERO_AREA_REL * longest
    return np.flatnonzero(repeated | zero_area)


def _reject_degenerate(mesh: TriangleMesh, path):
    bad = _degenerate_faces(mesh)
    if bad.size:
        k = int(bad[0])
        raise ParseError(
            f"face {k} {mesh.faces[k].tolist()} is degenerate (repeated vertex or zero area)",
            path=path,
        )


# ---------------------------------------------------------------------------
# writing


def _fmt(x: float) -> str:
    return repr(float(x))


def write_mesh(mesh: TriangleMesh, path, format: str = "auto") -> None:
    """Write ``mesh`` as ascii OFF, PLY or a TOSCA pair (by extension for ``auto``)."""
    path = Path(path)
    fmt = format
    if fmt == "auto":
        suffix = path.suffix.lower()
        fmt = {".ply": "PLY-ascii", ".vert": "TOSCA-vert-tri", ".tri": "TOSCA-vert-tri"}.get(suffix, "OFF")
    if fmt == "OFF":
        lines = ["OFF", f"{mesh.n} {mesh.face_count} 0"]
        lines += [" ".join(_fmt(c) for c in p) for p in mesh.vertices]
        lines += ["3 " + " ".join(str(int(i)) for i in f) for f in mesh.faces]
    elif fmt == "PLY-ascii":
        lines = _ply_header(mesh.n, mesh.face_count, colors=False)
        lines += [" ".join(_fmt(c) for c in p) for p in mesh.vertices]
        lines += ["3 " + " ".join(str(int(i)) for i in f) for f in mesh.faces]
    elif fmt == "TOSCA-vert-tri":
        vert_path, tri_path = _tosca_paths(path)
        vert_path.write_text("".join(" ".join(_fmt(c) for c in p) + "\n" for p in mesh.vertices))
        tri_path.write_text("".join(" ".join(str(int(i) + 1) for i in f) + "\n" for f in mesh.faces))
        return
    else:
        raise ValueError(f"unknown mesh format {format!r}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _ply_header(nv, nf, colors):
    lines = ["ply", "format ascii 1.0", f"element vertex {nv}",
             "property double x", "property double y", "property double z"]
    if colors:
        lines += ["property uchar red", "property uchar green", "property uchar blue"]
    lines += [f"element face {nf}", "property list uchar int vertex_indices", "end_header"]
    return lines


def ramp_colors(field) -> np.ndarray:
    """Map a scalar field to uint8 RGB rows through :data:`COLOR_RAMP`."""
    x = np.asarray(field, dtype=np.float64)
    lo, hi = float(x.min()), float(x.max())
    if hi - lo < _DEGENERATE_RANGE:
        t = np.full_like(x, 0.5)
    else:
        t = (x - lo) / (hi - lo)
    stops = np.array([s for s, _ in COLOR_RAMP])
    cols = np.array([c for _, c in COLOR_RAMP], dtype=np.float64)
    rgb = np.stack([np.interp(t, stops, cols[:, ch]) for ch in range(3)], axis=1)
    return np.floor(rgb + 0.5).astype(np.uint8)


def write_scalar_field(mesh: TriangleMesh, field, path) -> None:
    """Write ``mesh`` as a vertex-coloured ascii PLY visualising ``field``."""
    x = np.asarray(field, dtype=np.float64)
    if x.shape != (mesh.n,):
        raise ValueError(f"field has shape {x.shape}, expected ({mesh.n},)")
    if not np.all(np.isfinite(x)):
        raise NonFiniteField(f"field has {int(np.sum(~np.isfinite(x)))} non-finite values")
    rgb = ramp_colors(x)
    lines = _ply_header(mesh.n, mesh.face_count, colors=True)
    lines += [
        " ".join(_fmt(c) for c in p) + f" {r} {g} {b}"
        for p, (r, g, b) in zip(mesh.vertices, rgb.tolist())
    ]
    lines += ["3 " + " ".join(str(int(i)) for i in f) for f in mesh.faces]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# queries


def validate(mesh: TriangleMesh) -> ValidationReport:
    counts = mesh.edge_face_counts
    m = mesh.face_count
    if m:
        # faces are connected when they share an edge
        e = np.sort(mesh.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        _, inv = np.unique(e, axis=0, return_inverse=True)
        inv = inv.ravel()
        face_of = np.repeat(np.arange(m), 3)
        inc = sparse.csr_matrix(
            (np.ones(len(inv)), (face_of, inv)), shape=(m, int(inv.max()) + 1)
        )
        ncomp, _ = csgraph.connected_components(inc @ inc.T, directed=False)
    else:
        ncomp = 0
    return ValidationReport(
        vertex_count=mesh.n,
        face_count=m,
        boundary_edge_count=int(np.sum(counts == 1)),
        non_manifold_edge_count=int(np.sum(counts > 2)),
        connected_component_count=int(ncomp),
        degenerate_face_list=tuple(int(k) for k in _degenerate_faces(mesh)),
        unreferenced_vertex_count=int(np.sum(~mesh.referenced)),
    )


def vertex_fan(mesh: TriangleMesh, v: int) -> VertexFan:
    """Corner angles of the faces around ``v``, in circulation order."""
    if not 0 <= v < mesh.n:
        raise IndexOutOfRange(f"vertex {v} outside [0, {mesh.n})")
    if not mesh.referenced[v]:
        raise UnreferencedVertex(f"vertex {v} is not used by any face")
    fans = mesh.fans
    if fans.ok[v]:
        cum = fans.cum[fans.ptr[v]: fans.ptr[v + 1]]
        angles = tuple(float(a) for a in np.diff(cum))
        return VertexFan(v, angles, float(sum(angles)), bool(fans.closed[v]), True)
    angles = []
    pos = mesh.vertices
    for face in mesh.faces[(mesh.faces == v).any(axis=1)]:
        others = [int(i) for i in face if i != v]
        angles.append(_corner_angle(pos[v], pos[others[0]], pos[others[1]]))
    return VertexFan(v, tuple(angles), float(sum(angles)), False, False)


def mesh_from_arrays(vertices, faces, name="") -> TriangleMesh:
    """Build a mesh, rejecting degenerate faces the same way :func:`load_mesh` does."""
    mesh = TriangleMesh(vertices, faces, name)
    _reject_degenerate(mesh, None)
    return mesh


def default_cache_dir() -> Path:
    return Path(os.environ.get("QUASIGEO_CACHE_DIR", ".quasigeo-cache"))
