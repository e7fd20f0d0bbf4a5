"""Self-symmetry, prior-free spectral correspondence and stable regions."""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph

from .errors import K0OutOfRange, ShapeMismatch
from .geodesic.matrix import GeodesicMatrix
from .mesh import TriangleMesh
from .spectrum import MAX_K0, SpectralDecomposition, decompose, embedding_sum, eigenvalue_blocks

EPS_MODES = ("config", "variance")
# exhaustive alignment search is used while the number of (subset, assignment)
# combinations stays below this
EXHAUSTIVE_LIMIT = 200_000
VARIANCE_SAMPLE = 2_000_000
VARIANCE_ALL_PAIRS_MAX_N = 2000
# relative eigenvalue gap under which pool vectors form a rotatable block
BLOCK_TOL = 1e-8
# objective differences below this count as ties
_TIE = 1e-10


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------- epsilon

@dataclass(frozen=True)
class EpsilonBound:
    epsilon: float
    method: str
    scale: float
    inputs_fingerprint: str = ""
    samples: int = 0


def epsilon_bound(matrix_x=None, matrix_y=None, mode: str = "variance", scale: float = 1.0,
                  seed: int = 0, k0: int = MAX_K0, ordering: str = "abs-desc") -> EpsilonBound:
    """Threshold for the symmetry and stability criteria.

    ``mode="config"`` returns ``scale`` itself.  ``mode="variance"`` with two
    matrices (same vertex labelling) returns ``scale`` times the standard
    deviation of ``|d_X(i, j) - d_Y(i, j)|`` over pairs ``i < j``: all pairs
    for ``n <= 2000``, otherwise a seeded uniform sample of two million.  With
    a single matrix it is ``scale`` times the standard deviation of the
    ``k0``-term embedding sum.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    if mode == "config":
        return EpsilonBound(float(scale), "config", float(scale))
    if mode != "variance":
        raise ValueError(f"mode must be one of {EPS_MODES}, got {mode!r}")
    if matrix_x is None:
        raise ValueError("variance mode needs at least one matrix")
    dx = _as_array(matrix_x)
    if matrix_y is None:
        k0 = min(k0, dx.shape[0])
        s = embedding_sum(decompose(dx, k0, ordering), k0)
        return EpsilonBound(float(scale * s.std()), "variance", float(scale), _digest(dx), s.size)
    dy = _as_array(matrix_y)
    if dx.shape != dy.shape:
        raise ShapeMismatch(f"matrices have shapes {dx.shape} and {dy.shape}")
    n = dx.shape[0]
    if n <= VARIANCE_ALL_PAIRS_MAX_N:
        i, j = np.triu_indices(n, 1)
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, VARIANCE_SAMPLE)
        j = rng.integers(0, n - 1, VARIANCE_SAMPLE)
        j = j + (j >= i)
    diff = np.abs(dx[i, j] - dy[i, j])
    eps = float(scale * diff.std()) if diff.size else 0.0
    return EpsilonBound(eps, "variance", float(scale), _digest(dx, dy), int(diff.size))


def _as_array(m):
    return m.d if isinstance(m, GeodesicMatrix) else np.asarray(m, dtype=np.float64)


def _eps_value(eps) -> float:
    e = eps.epsilon if isinstance(eps, EpsilonBound) else float(eps)
    if not e >= 0:
        raise ValueError(f"epsilon must be non-negative, got {e}")
    return e


# ---------------------------------------------------------------- symmetry

@dataclass(frozen=True, eq=False)
class SymmetryMap:
    embedding: np.ndarray
    pairs: np.ndarray
    epsilon_used: float
    k0: int

    def partners(self, p: int) -> np.ndarray:
        """Vertices paired with ``p``."""
        a, b = self.pairs[:, 0], self.pairs[:, 1]
        return np.sort(np.concatenate([b[a == p], a[b == p]]))


def _check_k0(k0, *decomps):
    top = min([MAX_K0] + [d.k for d in decomps])
    if not 1 <= k0 <= top:
        raise K0OutOfRange(f"k0 = {k0} outside [1, {top}]")


def close_pairs(values, eps: float) -> np.ndarray:
    """All ``(p, q)``, ``p < q``, with ``|values[p] - values[q]| <= eps``, sorted."""
    s = np.asarray(values, dtype=np.float64)
    order = np.argsort(s, kind="stable")
    ss = s[order]
    hi = np.searchsorted(ss, ss + eps, side="right")
    chunks = []
    for a in range(len(ss)):
        if hi[a] > a + 1:
            other = order[a + 1: hi[a]]
            p = np.full(other.size, order[a])
            chunks.append(np.stack([np.minimum(p, other), np.maximum(p, other)], 1))
    if not chunks:
        return np.empty((0, 2), dtype=np.int64)
    pairs = np.concatenate(chunks).astype(np.int64)
    # float rounding in ss + eps can admit a pair just over the threshold
    pairs = pairs[np.abs(s[pairs[:, 0]] - s[pairs[:, 1]]) <= eps]
    return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]


def self_symmetry(decomp: SpectralDecomposition, k0: int, eps) -> SymmetryMap:
    """Vertex pairs whose ``k0``-term embedding sums agree within ``eps``."""
    _check_k0(k0, decomp)
    e = _eps_value(eps)
    s = embedding_sum(decomp, k0)
    return SymmetryMap(s, close_pairs(s, e), e, k0)


# ---------------------------------------------------------------- alignment

@dataclass(frozen=True, eq=False)
class AlignedSpectra:
    """Paired eigenvectors of two shapes.

    ``aligned_x[:, b]`` and ``aligned_y[:, b]`` are the ``b``-th matched
    pair; the ``y`` column already carries its sign.  ``objective`` is the
    commutation residual minimised by :func:`align_spectra` (see
    :func:`alignment_objective`); ``literal_objective`` is the plain
    ``||X^T G_Y Y||_F + ||Y^T G_X X||_F`` of the same selection, kept for
    reference.
    """

    k0: int
    selection_x: np.ndarray
    selection_y: np.ndarray
    signs: np.ndarray
    aligned_x: np.ndarray
    aligned_y: np.ndarray
    gamma_x: np.ndarray
    gamma_y: np.ndarray
    objective: float
    literal_objective: float
    method: str
    identity_objective: float


def alignment_objective(ax, ay, gx, gy) -> float:
    """``||(M - I) G_Y||_F / ||G_Y||_F + ||(M^T - I) G_X||_F / ||G_X||_F``, ``M = ax^T ay``.

    ``G`` are the diagonal eigenvalue matrices of the selected pairs.  Both
    terms vanish exactly when the paired columns coincide.  Dividing by the
    selected eigenvalue norms keeps the value from favouring selections of
    small eigenvalues merely because they are small.
    """
    m = ax.T @ ay
    return float(_term(m, gy) + _term(m.T, gx))


def _term(m, g):
    scale = np.linalg.norm(g)
    return np.linalg.norm((m - np.eye(m.shape[0])) * g[None, :]) / scale if scale > 0 else 0.0


def literal_objective(ax, ay, gx, gy) -> float:
    return float(np.linalg.norm(ax.T @ (ay * gy)) + np.linalg.norm(ay.T @ (ax * gx)))


def _rotate_blocks(px, py, gy, atol):
    """Rotate each degenerate block of ``py`` onto the ``px`` vectors it overlaps most.

    A block is a run of eigenvalues of ``py`` within ``atol``.  Its target is
    the set of ``px`` columns (as many as the block size) with the largest
    projection onto the block subspace, i.e. the smallest principal angles;
    the rotation is the orthogonal Procrustes solution onto them.
    """
    py = py.copy()
    for block in eigenvalue_blocks(gy, atol):
        m = len(block)
        if m < 2:
            continue
        energy = np.linalg.norm(py[:, block].T @ px, axis=0)
        near = np.sort(sorted(range(px.shape[1]), key=lambda i: (-energy[i], i))[:m])
        u, _, vt = np.linalg.svd(py[:, block].T @ px[:, near])
        py[:, block] = py[:, block] @ (u @ vt)
    return py


class _Scorer:
    """Objective over pool indices, with the optimal sign per pair."""

    def __init__(self, gram, gx, gy):
        self.gram = gram
        self.gx = gx
        self.gy = gy

    def signs(self, sx, sy):
        d = self.gram[sx, sy]
        return np.where(d < 0, -1.0, 1.0)

    def __call__(self, sx, sy):
        m = self.gram[np.ix_(sx, sy)] * self.signs(sx, sy)[None, :]
        return float(_term(m, self.gy[sy]) + _term(m.T, self.gx[sx]))


def _exhaustive(score, pool, k0, tie):
    """All injective assignments of pool y pairs to the first ``k0`` x pairs."""
    sx = np.arange(k0)
    best, best_sy = math.inf, None
    for sy in itertools.permutations(range(pool), k0):
        sya = np.array(sy)
        val = score(sx, sya)
        if val < best - tie:
            best, best_sy = val, sya
    return best, (sx, best_sy)


def _proximity_pairing(gx, gy, k0):
    """Each of the first ``k0`` x pairs matched to the nearest free y eigenvalue."""
    free = list(range(len(gy)))
    sy = []
    for b in range(k0):
        j = min(free, key=lambda j: (abs(gx[b] - gy[j]), j))
        free.remove(j)
        sy.append(j)
    return np.arange(k0), np.array(sy)


def _local_search(score, sx, sy, pool, tie):
    """Best-improvement descent over swaps and replacements of y members."""
    cur = score(sx, sy)
    k0 = len(sx)
    while True:
        best, move = cur, None
        used_y = set(sy.tolist())
        for a in range(k0):
            for b in range(a + 1, k0):
                ty = sy.copy()
                ty[a], ty[b] = ty[b], ty[a]
                v = score(sx, ty)
                if v < best - tie:
                    best, move = v, ty
            for j in range(pool):
                if j not in used_y:
                    ty = sy.copy()
                    ty[a] = j
                    v = score(sx, ty)
                    if v < best - tie:
                        best, move = v, ty
        if move is None:
            return cur, sx, sy
        cur, sy = best, move


def _search(score, gx, gy, pool, k0, exhaustive):
    """Best ``(value, sx, sy)`` with ``sx`` the first ``k0`` x pairs."""
    if exhaustive:
        best, (sx, sy) = _exhaustive(score, pool, k0, _TIE)
        return best, sx, sy
    ident = (np.arange(k0), np.arange(k0))
    best, sx, sy = _local_search(score, *ident, pool, _TIE)
    v2, sx2, sy2 = _local_search(score, *_proximity_pairing(gx, gy, k0), pool, _TIE)
    if v2 < best - _TIE:
        best, sx, sy = v2, sx2, sy2
    return best, sx, sy


def _pair_key(sx, sy):
    # ordering of candidate selections that does not depend on argument order
    a, b = tuple(sx.tolist()), tuple(sy.tolist())
    return (a, b) if a <= b else (b, a)


def search_size(pool: int, k0: int) -> int:
    """Number of y assignments an exhaustive search visits."""
    return math.perm(pool, k0)


def align_spectra(dx: SpectralDecomposition, dy: SpectralDecomposition, k0: int,
                  method: str = "auto") -> AlignedSpectra:
    """Pair ``k0`` eigenvectors of ``dx`` with eigenvectors of ``dy``.

    Two searches are run and the lower objective kept: the first ``k0``
    pairs of ``dx`` matched to partners from the first ``2 k0`` pairs of
    ``dy``, and the same with the shapes' roles swapped.  The result is
    therefore the mirror image of ``align_spectra(dy, dx, k0)``.
    Degenerate eigenvalue blocks have no preferred basis, so each block of
    ``dx`` is first rotated toward the ``dy`` vectors it overlaps most, then
    each block of ``dy`` toward ``dx``.  Each search is exhaustive when small
    enough (``method="auto"``), otherwise a descent over swaps and
    replacements from the identity selection and from an
    eigenvalue-proximity pairing.  Each pair's sign is the one that lowers
    the objective, ``+1`` on ties.  Among equal objectives the
    lexicographically first selection wins.
    """
    if dx.n != dy.n:
        raise ShapeMismatch(f"shapes have {dx.n} and {dy.n} vertices")
    _check_k0(k0, dx, dy)
    if method not in ("auto", "exhaustive", "greedy"):
        raise ValueError(f"unknown method {method!r}")
    pool = min(2 * k0, dx.k, dy.k)
    px, gx = dx.eigenvectors[:, :pool], dx.eigenvalues[:pool]
    py, gy = dy.eigenvectors[:, :pool], dy.eigenvalues[:pool]
    px = _rotate_blocks(py, px, gx, BLOCK_TOL * max(dx.frobenius, 1e-300))
    py = _rotate_blocks(px, py, gy, BLOCK_TOL * max(dy.frobenius, 1e-300))
    gram = px.T @ py
    score = _Scorer(gram, gx, gy)
    ident_val = score(np.arange(k0), np.arange(k0))
    exhaustive = method == "exhaustive" or (
        method == "auto" and 2 * search_size(pool, k0) <= EXHAUSTIVE_LIMIT)
    used = "exhaustive" if exhaustive else "greedy"
    best, sx, sy = _search(score, gx, gy, pool, k0, exhaustive)
    # the same search with the roles of the shapes swapped, so that aligning
    # (Y, X) finds the mirror image of the (X, Y) result
    v2, sy2, sx2 = _search(_Scorer(gram.T, gy, gx), gy, gx, pool, k0, exhaustive)
    if v2 < best - _TIE or (v2 <= best + _TIE and _pair_key(sx2, sy2) < _pair_key(sx, sy)):
        best, sx, sy = v2, sx2, sy2
    order = np.argsort(sx, kind="stable")
    sx, sy = sx[order], sy[order]
    signs = score.signs(sx, sy)
    ax = px[:, sx]
    ay = py[:, sy] * signs[None, :]
    return AlignedSpectra(
        k0, sx, sy, signs.astype(np.int64), ax, ay, gx[sx], gy[sy],
        alignment_objective(ax, ay, gx[sx], gy[sy]),
        literal_objective(ax, ay, gx[sx], gy[sy]), used, ident_val,
    )


# ---------------------------------------------------------------- errors

@dataclass(frozen=True, eq=False)
class CorrespondenceResult:
    c_xy: float
    per_order: np.ndarray
    per_vertex: np.ndarray

    @property
    def n(self) -> int:
        return self.per_vertex.size

    @property
    def k0(self) -> int:
        return self.per_order.size

    def variants(self) -> dict:
        """``c_xy`` raw and normalised by ``k0`` and by ``n``."""
        return {"raw": self.c_xy, "per_k0": self.c_xy / self.k0, "per_n": self.c_xy / self.n}


def correspondence_error(aligned: AlignedSpectra) -> CorrespondenceResult:
    """Column-wise and row-wise differences of the aligned eigenvectors."""
    diff = aligned.aligned_x - aligned.aligned_y
    per_order = np.linalg.norm(diff, axis=0)
    return CorrespondenceResult(float(per_order.sum()), per_order, np.linalg.norm(diff, axis=1))


@dataclass(frozen=True, eq=False)
class StableRegion:
    mask: np.ndarray
    score: float
    epsilon_used: float

    @property
    def fraction(self) -> float:
        return float(self.mask.mean()) if self.mask.size else 0.0


def stable_regions(aligned: AlignedSpectra, corr: CorrespondenceResult, eps) -> StableRegion:
    """Vertices whose aligned spectral rows differ by at most ``eps``."""
    if corr.per_vertex.size != aligned.aligned_x.shape[0]:
        raise ShapeMismatch("correspondence result does not match the alignment")
    e = _eps_value(eps)
    mask = corr.per_vertex <= e
    return StableRegion(mask, float(corr.per_vertex[mask].sum()), e)


def mask_components(mesh: TriangleMesh, mask) -> np.ndarray:
    """Label connected groups of masked vertices along mesh edges.

    Returns per-vertex labels ``0, 1, ...`` ordered by lowest member index;
    unmasked vertices get ``-1``.
    """
    mask = np.asarray(mask, dtype=bool)
    labels = np.full(mask.size, -1, dtype=np.int64)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return labels
    sub = mesh.edge_graph[idx][:, idx]
    _, lab = csgraph.connected_components(sub, directed=False)
    # relabel by first appearance so labels do not depend on scipy internals
    _, first = np.unique(lab, return_index=True)
    remap = np.argsort(np.argsort(first))
    labels[idx] = remap[lab]
    return labels
