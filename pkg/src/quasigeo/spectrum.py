"""Eigendecomposition of the all-pairs distance operator and spectral embeddings."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceFailure, K0OutOfRange, NonSymmetric
from .geodesic.matrix import GeodesicMatrix

ORDERINGS = ("abs-desc", "alg-desc")
DEFAULT_K0 = 20
MAX_K0 = 20
# relative gap under which two eigenvalues are treated as one block
DEGENERACY_TOL = 1e-8
# relative size under which two entries compete for "largest" in sign fixing
_SIGN_TIE = 1e-12


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Leading eigenpairs ``D phi_i = gamma_i phi_i`` of a distance matrix.

    Attributes
    ----------
    eigenvalues : (k,) array
    eigenvectors : (n, k) array
        Unit columns, each with its largest-magnitude entry positive.
    ordering : str
        ``"abs-desc"`` (largest ``|gamma|`` first) or ``"alg-desc"``.
    frobenius : float
        ``||D||_F`` of the source matrix, the scale for tolerances.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ordering: str = "abs-desc"
    source_fingerprint: str = ""
    frobenius: float = 0.0

    def __post_init__(self):
        for name in ("eigenvalues", "eigenvectors"):
            a = np.array(getattr(self, name), dtype=np.float64, copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def k(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def n(self) -> int:
        return self.eigenvectors.shape[0]

    def blocks(self, tol: float = DEGENERACY_TOL):
        """Runs of consecutive eigenvalues closer than ``tol * ||D||_F``, as index lists."""
        return eigenvalue_blocks(self.eigenvalues, tol * max(self.frobenius, 1e-300))


def eigenvalue_blocks(values, atol):
    out = [[0]] if len(values) else []
    for i in range(1, len(values)):
        if abs(values[i] - values[out[-1][-1]]) <= atol:
            out[-1].append(i)
        else:
            out.append([i])
    return out


def canonical_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry is positive.

    Entries within a relative ``1e-12`` of the maximum count as tied and the
    lowest row index among them decides.
    """
    v = np.array(vectors, dtype=np.float64, copy=True)
    if v.ndim == 1:
        return canonical_signs(v[:, None])[:, 0]
    mag = np.abs(v)
    top = mag.max(axis=0)
    for c in range(v.shape[1]):
        if top[c] == 0.0:
            continue
        r = int(np.flatnonzero(mag[:, c] >= top[c] * (1.0 - _SIGN_TIE))[0])
        if v[r, c] < 0:
            v[:, c] = -v[:, c]
    return v


def _order(values: np.ndarray, ordering: str) -> np.ndarray:
    idx = np.arange(len(values))
    if ordering == "abs-desc":
        # ties in |gamma| put the positive value first, then lower index
        return np.array(sorted(idx, key=lambda i: (-abs(values[i]), -np.sign(values[i]), i)))
    if ordering == "alg-desc":
        return np.array(sorted(idx, key=lambda i: (-values[i], i)))
    raise ValueError(f"ordering must be one of {ORDERINGS}, got {ordering!r}")


def decompose(matrix, k: int | None = None, ordering: str = "abs-desc") -> SpectralDecomposition:
    """Top ``k`` eigenpairs of a symmetric distance matrix.

    Parameters
    ----------
    matrix : GeodesicMatrix or (n, n) array
        Must be exactly symmetric.
    k : int, optional
        Number of pairs kept; all ``n`` by default.
    ordering : {"abs-desc", "alg-desc"}
    """
    if isinstance(matrix, GeodesicMatrix):
        d, fp = matrix.d, matrix.fingerprint
    else:
        d = np.asarray(matrix, dtype=np.float64)
        fp = hashlib.sha256(np.ascontiguousarray(d, dtype="<f8").tobytes()).hexdigest()
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise NonSymmetric(f"matrix of shape {d.shape} is not square")
    if not np.array_equal(d, d.T):
        raise NonSymmetric(f"max asymmetry {np.abs(d - d.T).max():.3g}")
    n = d.shape[0]
    k = n if k is None else int(k)
    if not 1 <= k <= n:
        raise K0OutOfRange(f"k = {k} outside [1, {n}]")
    if ordering not in ORDERINGS:
        raise ValueError(f"ordering must be one of {ORDERINGS}, got {ordering!r}")
    try:
        w, v = scipy.linalg.eigh(d, driver="evd")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise ConvergenceFailure(str(exc)) from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
        raise ConvergenceFailure("eigensolver returned non-finite values")
    keep = _order(w, ordering)[:k]
    return SpectralDecomposition(
        w[keep], canonical_signs(v[:, keep]), ordering, fp, float(np.linalg.norm(d))
    )


def embedding_sum(decomp: SpectralDecomposition, k0: int) -> np.ndarray:
    """Per-vertex sum of the first ``k0`` eigenvectors."""
    if not 1 <= k0 <= decomp.k:
        raise K0OutOfRange(f"k0 = {k0} outside [1, {decomp.k}]")
    return decomp.eigenvectors[:, :k0].sum(axis=1)


def residuals(decomp: SpectralDecomposition, d) -> np.ndarray:
    """``||D phi_i - gamma_i phi_i||_2`` for every retained pair."""
    d = d.d if isinstance(d, GeodesicMatrix) else np.asarray(d)
    phi = decomp.eigenvectors
    return np.linalg.norm(d @ phi - phi * decomp.eigenvalues, axis=0)


def write_eigenvalues_csv(decomp: SpectralDecomposition, path) -> None:
    """CSV with columns ``index, eigenvalue`` (1-based index, ``repr`` floats)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "eigenvalue"])
        for i, g in enumerate(decomp.eigenvalues, 1):
            w.writerow([i, repr(float(g))])
