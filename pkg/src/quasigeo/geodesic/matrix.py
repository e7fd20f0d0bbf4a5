"""All-pairs quasi-geodesic distance matrix and its on-disk cache."""

from __future__ import annotations

import hashlib
import logging
import struct
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
from scipy.sparse import csgraph

from ..errors import CorruptCache, Disconnected, FingerprintMismatch, NegativeEntry, NonManifoldMesh
from ..mesh import TriangleMesh, validate
from . import _kernel
from .paths import DEFAULT_MAX_ITER, DEFAULT_TOL

logger = logging.getLogger(__name__)

CACHE_MAGIC = b"QGEODMAT"
CACHE_VERSION = 1
# magic, version, n, tol, max_iter, mesh fingerprint, payload sha256
_HEADER = struct.Struct("<8sIQdI32s32s")


@dataclass(frozen=True, eq=False)
class GeodesicMatrix:
    """Symmetric all-pairs distance matrix of a mesh."""

    d: np.ndarray
    mesh_fingerprint: str = ""
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    unconverged: int = 0
    runtime: float = field(default=0.0, compare=False)

    def __post_init__(self):
        d = np.array(self.d, dtype=np.float64, copy=True)
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.d.astype("<f8").tobytes()).hexdigest()


def symmetrize(raw, mesh_fingerprint: str = "", **meta) -> GeodesicMatrix:
    """Element-wise minimum of ``raw`` and its transpose, with a zero diagonal."""
    r = np.asarray(raw, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {r.shape}")
    if np.any(r < 0):
        i, j = np.argwhere(r < 0)[0]
        raise NegativeEntry(f"entry ({i}, {j}) = {r[i, j]} is negative")
    d = np.minimum(r, r.T)
    np.fill_diagonal(d, 0.0)
    return GeodesicMatrix(d, mesh_fingerprint, **meta)


def check_geodesic_ready(mesh: TriangleMesh) -> None:
    """Raise unless ``mesh`` is edge-manifold and edge-connected."""
    report = validate(mesh)
    if report.non_manifold_edge_count:
        raise NonManifoldMesh(f"{report.non_manifold_edge_count} edges are shared by more than two faces")
    if report.unreferenced_vertex_count:
        raise Disconnected(f"{report.unreferenced_vertex_count} vertices are not used by any face")
    ncomp, _ = csgraph.connected_components(mesh.edge_graph, directed=False)
    if ncomp != 1:
        raise Disconnected(f"edge graph has {ncomp} connected components")


def all_pairs(mesh: TriangleMesh, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
              threads: int | None = None, batch: int = 256) -> GeodesicMatrix:
    """Quasi-geodesic distance between every pair of vertices.

    Each directed pair ``(i, j)`` is straightened from its Dijkstra edge path;
    the matrix is then symmetrised by the element-wise minimum and passed
    through :func:`relay_repair`.
    """
    check_geodesic_ready(mesh)
    n = mesh.n
    fans = mesh.fans
    verts = np.ascontiguousarray(mesh.vertices)
    start = time.perf_counter()
    raw = np.empty((n, n))
    unconverged = 0
    with warnings.catch_warnings():
        # numba probes an optional threading backend and warns if it is too old
        warnings.filterwarnings("ignore", message=".*TBB.*")
        prev_threads = numba.get_num_threads()
        if threads:
            numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
        try:
            for lo in range(0, n, batch):
                sources = np.arange(lo, min(n, lo + batch), dtype=np.int64)
                _, pred = csgraph.dijkstra(
                    mesh.edge_graph, directed=False, indices=sources, return_predecessors=True
                )
                rows, conv = _kernel.all_pairs_rows(
                    verts, fans.ptr, fans.spokes, fans.cum, fans.closed, fans.ok,
                    pred.astype(np.int64), sources, float(tol), int(max_iter),
                )
                raw[lo: lo + len(sources)] = rows
                unconverged += int((~conv).sum())
            if not np.all(np.isfinite(raw)):
                raise Disconnected("some vertex pairs have no connecting path")
            d = np.minimum(raw, raw.T)
            np.fill_diagonal(d, 0.0)
            repaired = relay_repair(mesh, d, tol, max_iter)
        finally:
            numba.set_num_threads(prev_threads)
    elapsed = time.perf_counter() - start
    logger.info("all-pairs on %d vertices: %.2fs, %d unconverged paths, %d relay repairs",
                n, elapsed, unconverged, repaired)
    return symmetrize(d, mesh.fingerprint, tol=float(tol), max_iter=int(max_iter),
                      unconverged=unconverged, runtime=elapsed)


def relay_repair(mesh: TriangleMesh, d: np.ndarray, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, rounds: int = 8) -> int:
    """Shorten entries of ``d`` in place that break the triangle inequality.

    A straightened path is only locally shortest, so a pair can settle on a
    longer route than the one through some relay vertex ``k``.  Such a pair
    is re-straightened from the joined path ``i -> k -> j`` and takes the
    smaller of that length and ``d[i, k] + d[k, j]`` (the length of the
    joined path itself).  Each round uses the matrix from the start of the
    round, so the outcome does not depend on the order of the pairs.
    Returns the number of entries changed.
    """
    n = d.shape[0]
    slack = float(tol) * float(mesh.edge_lengths.max())
    fans = mesh.fans
    verts = np.ascontiguousarray(mesh.vertices)
    changed = 0
    for _ in range(rounds):
        best, arg = _kernel.best_relay(d)
        bad = np.argwhere(np.triu(d - best > slack, 1))
        if not len(bad):
            break
        relay = arg[bad[:, 0], bad[:, 1]]
        need = np.unique(np.concatenate([bad.ravel(), relay]))
        row = np.full(n, -1, dtype=np.int64)
        row[need] = np.arange(len(need))
        _, pred = csgraph.dijkstra(mesh.edge_graph, directed=False, indices=need,
                                   return_predecessors=True)
        lengths = _kernel.relay_lengths(
            verts, fans.ptr, fans.spokes, fans.cum, fans.closed, fans.ok, pred.astype(np.int64),
            row, bad.astype(np.int64), relay, float(tol), int(max_iter),
        )
        i, j = bad[:, 0], bad[:, 1]
        new = np.minimum(lengths, best[i, j])
        d[i, j] = d[j, i] = np.minimum(d[i, j], new)
        changed += len(bad)
    return changed


def cache_write(matrix: GeodesicMatrix, path) -> None:
    """Write ``matrix`` in the binary cache format (see the README)."""
    payload = matrix.d.astype("<f8").tobytes()
    header = _HEADER.pack(
        CACHE_MAGIC, CACHE_VERSION, matrix.n, float(matrix.tol), int(matrix.max_iter),
        bytes.fromhex(matrix.mesh_fingerprint) if matrix.mesh_fingerprint else b"\0" * 32,
        hashlib.sha256(payload).digest(),
    )
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    tmp.replace(path)


def cache_read(path, mesh: TriangleMesh | None = None) -> GeodesicMatrix:
    """Read a cache file, checking its checksum and (if given) the mesh fingerprint."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise CorruptCache(f"{path}: file is shorter than the header")
    magic, version, n, tol, max_iter, fp, checksum = _HEADER.unpack_from(blob)
    if magic != CACHE_MAGIC or version != CACHE_VERSION:
        raise CorruptCache(f"{path}: not a distance cache (magic {magic!r}, version {version})")
    payload = blob[_HEADER.size:]
    if len(payload) != 8 * n * n:
        raise CorruptCache(f"{path}: expected {8 * n * n} payload bytes, found {len(payload)}")
    if hashlib.sha256(payload).digest() != checksum:
        raise CorruptCache(f"{path}: checksum mismatch")
    fingerprint = fp.hex()
    if mesh is not None and fingerprint != mesh.fingerprint:
        raise FingerprintMismatch(
            f"{path}: cache belongs to mesh {fingerprint[:12]}, not {mesh.fingerprint[:12]}"
        )
    d = np.frombuffer(payload, dtype="<f8").reshape(n, n)
    return GeodesicMatrix(d, fingerprint, tol=tol, max_iter=max_iter)


def cache_path(cache_dir, mesh: TriangleMesh, tol: float, max_iter: int) -> Path:
    """Cache file name keyed by mesh content and straightening settings."""
    key = hashlib.sha256(f"{mesh.fingerprint}:{float(tol)!r}:{int(max_iter)}".encode()).hexdigest()
    return Path(cache_dir) / f"{key[:24]}.qgd"


def cached_all_pairs(mesh: TriangleMesh, cache_dir=None, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER, threads: int | None = None):
    """:func:`all_pairs` backed by a cache file; ``cache_dir=None`` disables caching.

    A cache that fails its checksum is recomputed and overwritten.
    """
    if cache_dir is None:
        return all_pairs(mesh, tol, max_iter, threads)
    path = cache_path(cache_dir, mesh, tol, max_iter)
    if path.exists():
        try:
            m = cache_read(path, mesh)
            if m.tol == float(tol) and m.max_iter == int(max_iter):
                logger.info("using cached distances %s", path)
                return m
        except CorruptCache as exc:
            logger.warning("discarding cache: %s", exc)
    m = all_pairs(mesh, tol, max_iter, threads)
    Path(cache_dir).mkdir(parents=True, exist_ok=True)
    cache_write(m, path)
    return m
