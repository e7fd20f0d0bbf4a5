"""Correspondence metrics, report records and the TOSCA category runner."""

from __future__ import annotations

import csv
import json
import logging
import os
import re
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import IndexOutOfRange, ShapeMismatch
from .geodesic.matrix import GeodesicMatrix

logger = logging.getLogger(__name__)

TOSCA_ENV = "QUASIGEO_TOSCA_DIR"
TOSCA_CATEGORIES = ("cat", "centaur", "david", "dog", "horse", "michael", "victoria", "wolf", "gorilla")
_NN_TIE = 1e-12


def geodesic_error(predicted, truth, matrix_y, normalizer: float | None = None,
                   surface_area: float | None = None, per_vertex: bool = False):
    """Mean of ``d_Y(predicted[p], truth[p]) / normalizer`` over vertices.

    The normalizer defaults to ``sqrt(surface_area)``; one of the two must be
    given.  With ``per_vertex=True`` the individual normalised errors are
    returned instead of their mean.
    """
    d = matrix_y.d if isinstance(matrix_y, GeodesicMatrix) else np.asarray(matrix_y)
    pred = np.asarray(predicted, dtype=np.int64)
    true = np.asarray(truth, dtype=np.int64)
    if pred.shape != true.shape:
        raise ShapeMismatch(f"predicted has {pred.size} entries, truth {true.size}")
    n = d.shape[0]
    for name, arr in (("predicted", pred), ("truth", true)):
        bad = np.flatnonzero((arr < 0) | (arr >= n))
        if bad.size:
            raise IndexOutOfRange(f"{name}[{bad[0]}] = {arr[bad[0]]} outside [0, {n})")
    if normalizer is None:
        if surface_area is None:
            raise ValueError("give a normalizer or the target surface area")
        normalizer = float(np.sqrt(surface_area))
    if not normalizer > 0:
        raise ValueError("normalizer must be positive")
    err = d[pred, true] / normalizer
    return err if per_vertex else float(err.mean())


def percent_correspondence(errors, threshold: float) -> float:
    """Percentage of entries of ``errors`` at or below ``threshold``."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    e = np.asarray(errors, dtype=np.float64)
    return float(100.0 * np.mean(e <= threshold)) if e.size else 0.0


def cumulative_curve(errors, thresholds=None):
    """``(thresholds, percent)`` of the cumulative error distribution.

    By default the thresholds are the sorted distinct error values, so the
    curve is exact at every step.
    """
    e = np.sort(np.asarray(errors, dtype=np.float64))
    t = np.unique(e) if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    return t, 100.0 * np.searchsorted(e, t, side="right") / max(e.size, 1)


def nearest_neighbor_map(aligned) -> np.ndarray:
    """Map each row of ``aligned_x`` to the closest row of ``aligned_y``.

    Distances within ``1e-12`` of the minimum, relative to the larger of the
    minimum and the largest embedding entry, are tied and the lowest target
    index wins.
    """
    ax = np.asarray(aligned.aligned_x)
    ay = np.asarray(aligned.aligned_y)
    scale = float(max(np.abs(ax).max(initial=0.0), np.abs(ay).max(initial=0.0)))
    out = np.empty(ax.shape[0], dtype=np.int64)
    step = max(1, 4_000_000 // max(ay.size, 1))
    for start in range(0, ax.shape[0], step):
        block = ax[start: start + step]
        d2 = ((block[:, None, :] - ay[None, :, :]) ** 2).sum(axis=2)
        dist = np.sqrt(d2)
        lo = dist.min(axis=1, keepdims=True)
        tied = dist <= lo + _NN_TIE * np.maximum(lo, scale)
        out[start: start + len(block)] = tied.argmax(axis=1)
    return out


# ---------------------------------------------------------------- reports

PAIR_FIELDS = (
    "shape_x", "shape_y", "n", "k0", "c_xy", "c_xy_per_k0", "c_xy_per_n", "objective",
    "epsilon", "epsilon_method", "stable_score", "stable_fraction", "geodesic_error",
    "normalizer", "percent_correspondence", "threshold",
)


@dataclass
class PairRecord:
    shape_x: str
    shape_y: str
    n: int
    k0: int
    c_xy: float
    c_xy_per_k0: float
    c_xy_per_n: float
    objective: float
    epsilon: float
    epsilon_method: str
    stable_score: float
    stable_fraction: float
    geodesic_error: float
    normalizer: float
    percent_correspondence: float
    threshold: float
    curve: list = field(default_factory=list)


@dataclass
class EvalReport:
    pairs: list
    config: dict
    category: str = ""

    def aggregates(self) -> dict:
        """Mean of every numeric per-pair field."""
        if not self.pairs:
            return {}
        out = {}
        for name in PAIR_FIELDS:
            vals = [getattr(p, name) for p in self.pairs]
            if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
                out[name] = float(np.mean(vals))
        return out

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "config": self.config,
            "pairs": [asdict(p) for p in self.pairs],
            "aggregates": self.aggregates(),
        }


def write_report_json(report: EvalReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def write_report_csv(report: EvalReport, path) -> None:
    """One row per pair in :data:`PAIR_FIELDS` order, floats via ``repr``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PAIR_FIELDS)
        for p in report.pairs:
            w.writerow([_cell(getattr(p, f)) for f in PAIR_FIELDS])


def write_curve_csv(thresholds, percent, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "percent"])
        for t, pc in zip(thresholds, percent):
            w.writerow([repr(float(t)), repr(float(pc))])


def _cell(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


# ---------------------------------------------------------------- pipeline

def evaluate_pair(mesh_x, mesh_y, matrix_x, matrix_y, k0: int = 20, ordering: str = "abs-desc",
                  eps_mode: str = "variance", eps_scale: float = 1.0, seed: int = 0,
                  threshold: float = 0.25):
    """Run alignment, errors, stable regions and point-map metrics on one pair.

    Ground truth is the identity map (shared vertex labelling).  Returns the
    record together with the intermediate results and the wall time, which is
    kept out of the record so that records are reproducible byte for byte.
    """
    from .analysis import align_spectra, correspondence_error, epsilon_bound, stable_regions
    from .spectrum import decompose

    start = time.perf_counter()
    kk = min(2 * k0, matrix_x.n)
    dx = decompose(matrix_x, kk, ordering)
    dy = decompose(matrix_y, kk, ordering)
    aligned = align_spectra(dx, dy, k0)
    corr = correspondence_error(aligned)
    eps = epsilon_bound(matrix_x, matrix_y, eps_mode, eps_scale, seed=seed, k0=k0, ordering=ordering)
    stable = stable_regions(aligned, corr, eps)
    pred = nearest_neighbor_map(aligned)
    normalizer = float(np.sqrt(mesh_y.surface_area))
    errs = geodesic_error(pred, np.arange(mesh_x.n), matrix_y, normalizer, per_vertex=True)
    t, pc = cumulative_curve(errs)
    v = corr.variants()
    rec = PairRecord(
        mesh_x.name, mesh_y.name, mesh_x.n, k0, v["raw"], v["per_k0"], v["per_n"],
        aligned.objective, eps.epsilon, eps.method, stable.score, stable.fraction,
        float(errs.mean()), normalizer, percent_correspondence(errs, threshold), threshold,
        [[float(a), float(b)] for a, b in zip(t, pc)],
    )
    return rec, {"aligned": aligned, "corr": corr, "eps": eps, "stable": stable, "map": pred,
                 "errors": errs, "dx": dx, "dy": dy,
                 "runtime_s": time.perf_counter() - start}


def tosca_root():
    """Dataset directory from ``$QUASIGEO_TOSCA_DIR``, or ``None`` if unset or missing."""
    root = os.environ.get(TOSCA_ENV)
    if root and Path(root).is_dir():
        return Path(root)
    return None


def tosca_shapes(root, category: str) -> list:
    """Sorted ``.vert`` basenames of one category (e.g. ``cat0``, ``cat1``...)."""
    pat = re.compile(rf"^{re.escape(category)}(\d+)\.vert$")
    found = []
    for p in Path(root).iterdir():
        m = pat.match(p.name)
        if m and p.with_suffix(".tri").exists():
            found.append((int(m.group(1)), p.with_suffix("")))
    return [p for _, p in sorted(found)]


def run_category(root, category: str, max_shapes: int | None = None, cache_dir=None, **kwargs):
    """Evaluate every shape of a category against its first (baseline) shape."""
    from .geodesic import cached_all_pairs
    from .mesh import load_mesh

    paths = tosca_shapes(root, category)
    if max_shapes:
        paths = paths[:max_shapes]
    if len(paths) < 2:
        return EvalReport([], dict(kwargs), category)
    meshes = [load_mesh(p, "TOSCA-vert-tri") for p in paths]
    mats = [cached_all_pairs(m, cache_dir) for m in meshes]
    records = []
    for m, d in zip(meshes[1:], mats[1:]):
        if m.n != meshes[0].n:
            logger.warning("skipping %s: %d vertices vs %d", m.name, m.n, meshes[0].n)
            continue
        rec, _ = evaluate_pair(meshes[0], m, mats[0], d, **kwargs)
        records.append(rec)
    return EvalReport(records, dict(kwargs), category)
