import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasigeo import shapes
from quasigeo.analysis import AlignedSpectra, align_spectra
from quasigeo.errors import IndexOutOfRange, ShapeMismatch
from quasigeo.evaluation import (
    PAIR_FIELDS,
    EvalReport,
    PairRecord,
    cumulative_curve,
    evaluate_pair,
    geodesic_error,
    nearest_neighbor_map,
    percent_correspondence,
    run_category,
    tosca_shapes,
    write_report_csv,
    write_report_json,
)
from quasigeo.geodesic import all_pairs
from quasigeo.mesh import write_mesh
from quasigeo.spectrum import SpectralDecomposition, decompose


def test_geodesic_error_perfect_map(bumpy_matrix):
    idx = np.arange(bumpy_matrix.n)
    assert geodesic_error(idx, idx, bumpy_matrix, 1.0) == 0.0


def test_geodesic_error_arithmetic():
    d = np.zeros((10, 10))
    d[3, 7] = d[7, 3] = 0.3
    pred = np.full(10, 3)
    truth = np.full(10, 3)
    truth[5] = 7
    assert geodesic_error(pred, truth, d, normalizer=1.0) == pytest.approx(0.03)


def test_geodesic_error_default_normalizer(bumpy, bumpy_matrix):
    pred = np.roll(np.arange(bumpy.n), 1)
    truth = np.arange(bumpy.n)
    want = bumpy_matrix.d[pred, truth].mean() / np.sqrt(bumpy.surface_area)
    got = geodesic_error(pred, truth, bumpy_matrix, surface_area=bumpy.surface_area)
    assert got == pytest.approx(want, rel=1e-12)


def test_geodesic_error_errors(bumpy_matrix):
    idx = np.arange(bumpy_matrix.n)
    bad = idx.copy()
    bad[4] = bumpy_matrix.n
    with pytest.raises(IndexOutOfRange):
        geodesic_error(bad, idx, bumpy_matrix, 1.0)
    with pytest.raises(ShapeMismatch):
        geodesic_error(idx[:-1], idx, bumpy_matrix, 1.0)
    with pytest.raises(ValueError):
        geodesic_error(idx, idx, bumpy_matrix)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_geodesic_error_relabel_invariant(seed, bumpy_matrix):
    rng = np.random.default_rng(seed)
    n = bumpy_matrix.n
    pred = rng.integers(0, n, n)
    truth = rng.integers(0, n, n)
    perm = rng.permutation(n)  # old label i becomes perm[i]
    inv = np.argsort(perm)
    dp = bumpy_matrix.d[np.ix_(inv, inv)]
    a = geodesic_error(pred, truth, bumpy_matrix, 1.0)
    b = geodesic_error(perm[pred][inv], perm[truth][inv], dp, 1.0)
    assert b == pytest.approx(a, rel=1e-12)


def test_percent_correspondence_examples():
    assert percent_correspondence(np.zeros(8), 0.1) == 100.0
    e = np.zeros(10)
    e[:5] = 0.2
    assert percent_correspondence(e, 0.1) == 50.0
    with pytest.raises(ValueError):
        percent_correspondence(e, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=1, max_size=50), st.floats(0.01, 2), st.floats(0.01, 2))
def test_percent_correspondence_monotone(errors, t1, t2):
    lo, hi = sorted((t1, t2))
    assert percent_correspondence(errors, lo) <= percent_correspondence(errors, hi)


def test_cumulative_curve_steps():
    t, pc = cumulative_curve([0.1, 0.3, 0.1, 0.2])
    np.testing.assert_allclose(t, [0.1, 0.2, 0.3])
    np.testing.assert_allclose(pc, [50.0, 75.0, 100.0])


def aligned(x, y):
    k = x.shape[1]
    one = np.ones(k)
    return AlignedSpectra(k, np.arange(k), np.arange(k), np.ones(k, dtype=np.int64), x, y,
                          one, one, 0.0, 0.0, "exhaustive", 0.0)


def test_nn_map_identical(bumpy_matrix):
    dec = decompose(bumpy_matrix, 40)
    al = align_spectra(dec, dec, 20)
    np.testing.assert_array_equal(nearest_neighbor_map(al), np.arange(bumpy_matrix.n))


def test_nn_map_recovers_permutation(bumpy_matrix, rng):
    n = bumpy_matrix.n
    perm = rng.permutation(n)
    inv = np.argsort(perm)
    dec = decompose(bumpy_matrix, 20)
    dp = decompose(bumpy_matrix.d[np.ix_(inv, inv)], 20)
    # same spectrum, rows relabelled: vertex p of X is vertex perm[p] of Y
    m = nearest_neighbor_map(aligned(dec.eigenvectors, dp.eigenvectors))
    np.testing.assert_array_equal(m, perm)


def test_nn_map_tetra_ties_lowest_index():
    dec = decompose(np.ones((4, 4)) - np.eye(4), 4)
    m = nearest_neighbor_map(aligned(dec.eigenvectors[:, :1], dec.eigenvectors[:, :1]))
    np.testing.assert_array_equal(m, [0, 0, 0, 0])


def make_record(i):
    return PairRecord("a", f"b{i}", 10, 3, 0.1 * i, 0.1 * i / 3, 0.01 * i, 0.5, 0.2, "variance",
                      0.3 * i, 0.5, 0.05 * i, 2.0, 90.0 + i, 0.25, [[0.0, 50.0]])


def test_report_aggregates_are_means():
    rep = EvalReport([make_record(i) for i in range(1, 4)], {"k0": 3}, "toy")
    agg = rep.aggregates()
    for f in PAIR_FIELDS:
        vals = [getattr(p, f) for p in rep.pairs]
        if isinstance(vals[0], (int, float)):
            assert agg[f] == pytest.approx(np.mean(vals), abs=1e-9)
    assert "shape_x" not in agg


def test_report_writers(tmp_path):
    rep = EvalReport([make_record(1), make_record(2)], {"k0": 3}, "toy")
    write_report_json(rep, tmp_path / "r.json")
    write_report_csv(rep, tmp_path / "r.csv")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["category"] == "toy" and data["config"] == {"k0": 3}
    assert len(data["pairs"]) == 2
    rows = list(csv.reader((tmp_path / "r.csv").open()))
    assert tuple(rows[0]) == PAIR_FIELDS
    assert len(rows) == 3
    write_report_json(rep, tmp_path / "s.json")
    assert (tmp_path / "r.json").read_bytes() == (tmp_path / "s.json").read_bytes()


def test_evaluate_self_pair(bumpy, bumpy_matrix):
    rec, extra = evaluate_pair(bumpy, bumpy, bumpy_matrix, bumpy_matrix, k0=10, eps_mode="config",
                               eps_scale=0.01)
    assert rec.c_xy <= 1e-8
    assert rec.geodesic_error == 0.0
    assert rec.percent_correspondence == 100.0
    assert rec.stable_fraction == 1.0
    assert extra["runtime_s"] >= 0


def test_evaluate_near_isometric_pair():
    a = shapes.grid_strip(6, 3, 3.0, 1.5, jitter=0.25, seed=3)
    b = a.transformed(shapes.random_rotation(5), [0.5, 0, 0])
    da, db = all_pairs(a), all_pairs(b)
    rec, _ = evaluate_pair(a, b, da, db, k0=6)
    assert rec.geodesic_error <= 1e-9
    assert rec.epsilon <= 1e-9


def test_tosca_discovery_and_category(tmp_path):
    base = shapes.perturbed(shapes.icosphere(1), 0.02, seed=1)
    for i, seed in enumerate([1, 2]):
        m = shapes.perturbed(shapes.icosphere(1), 0.02, seed=seed)
        write_mesh(m, tmp_path / f"toy{i}.vert")
    (tmp_path / "toy9.vert").write_text("")  # no .tri partner: ignored
    found = tosca_shapes(tmp_path, "toy")
    assert [p.name for p in found] == ["toy0", "toy1"]
    rep = run_category(tmp_path, "toy", k0=5)
    assert len(rep.pairs) == 1
    assert rep.pairs[0].shape_x == "toy0" and rep.pairs[0].n == base.n
