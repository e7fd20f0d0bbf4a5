import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasigeo import analysis, shapes
from quasigeo.analysis import (
    AlignedSpectra,
    EpsilonBound,
    align_spectra,
    alignment_objective,
    close_pairs,
    correspondence_error,
    epsilon_bound,
    literal_objective,
    mask_components,
    self_symmetry,
    stable_regions,
)
from quasigeo.errors import K0OutOfRange, ShapeMismatch
from quasigeo.geodesic import all_pairs
from quasigeo.spectrum import SpectralDecomposition, decompose, embedding_sum


def strip_pair(seed_a, seed_b, nx=6, ny=3):
    a = shapes.grid_strip(nx, ny, 3.0, 1.5, jitter=0.25, seed=seed_a)
    b = shapes.grid_strip(nx, ny, 3.0, 1.5, jitter=0.25, seed=seed_b)
    return a, b


def half_turn(mesh):
    """Vertex permutation of the 180 degree in-plane rotation about the centre."""
    v = mesh.vertices
    c = v.mean(axis=0)
    image = 2 * c - v
    image[:, 2] = v[:, 2]
    rho = np.array([int(np.argmin(np.linalg.norm(v - p, axis=1))) for p in image])
    assert np.array_equal(np.sort(rho), np.arange(mesh.n))
    return rho


# ---------------------------------------------------------------- epsilon

def test_epsilon_identical_matrices_is_zero(bumpy_matrix):
    e = epsilon_bound(bumpy_matrix, bumpy_matrix)
    assert e.epsilon == 0.0
    assert e.method == "variance"
    assert e.samples == bumpy_matrix.n * (bumpy_matrix.n - 1) // 2


def test_epsilon_config_mode():
    e = epsilon_bound(mode="config", scale=0.05)
    assert e == EpsilonBound(0.05, "config", 0.05)


def test_epsilon_two_matrix_formula(rng):
    a = rng.random((6, 6))
    b = rng.random((6, 6))
    i, j = np.triu_indices(6, 1)
    want = 2.0 * np.abs(a[i, j] - b[i, j]).std()
    assert epsilon_bound(a, b, scale=2.0).epsilon == pytest.approx(want, rel=1e-12)


def test_epsilon_single_matrix_is_embedding_spread(bumpy_matrix):
    s = embedding_sum(decompose(bumpy_matrix, 20), 20)
    assert epsilon_bound(bumpy_matrix, k0=20).epsilon == pytest.approx(s.std(), rel=1e-12)


def test_epsilon_sampled_mode_is_seeded(monkeypatch, rng):
    monkeypatch.setattr(analysis, "VARIANCE_ALL_PAIRS_MAX_N", 5)
    monkeypatch.setattr(analysis, "VARIANCE_SAMPLE", 5000)
    a = rng.random((20, 20))
    b = rng.random((20, 20))
    e1 = epsilon_bound(a, b, seed=4)
    e2 = epsilon_bound(a, b, seed=4)
    e3 = epsilon_bound(a, b, seed=5)
    assert e1 == e2
    assert e1.samples == 5000
    assert e1.epsilon != e3.epsilon
    # a large uniform sample of pairs estimates the full-population spread
    i, j = np.triu_indices(20, 1)
    full = np.abs(a - b)[i, j].std()
    assert e1.epsilon == pytest.approx(full, rel=0.1)


def test_epsilon_errors(rng):
    with pytest.raises(ShapeMismatch):
        epsilon_bound(np.zeros((3, 3)), np.zeros((4, 4)))
    with pytest.raises(ValueError):
        epsilon_bound(mode="config", scale=0.0)
    with pytest.raises(ValueError):
        epsilon_bound(mode="guess")


# ---------------------------------------------------------------- symmetry

def test_close_pairs_matches_brute_force(rng):
    s = np.round(rng.random(40), 2)
    pairs = close_pairs(s, 0.03)
    want = [(p, q) for p in range(40) for q in range(p + 1, 40) if abs(s[p] - s[q]) <= 0.03]
    assert [tuple(x) for x in pairs.tolist()] == want


def test_self_symmetry_lists_every_orbit_pair():
    strip = shapes.grid_strip(6, 3, 3.0, 1.5)
    rho = half_turn(strip)
    d = all_pairs(strip)
    assert np.abs(d.d - d.d[np.ix_(rho, rho)]).max() <= 1e-12
    sym = self_symmetry(decompose(d, 20), 1, 1e-8)
    listed = {tuple(p) for p in sym.pairs.tolist()}
    for p in range(strip.n):
        q = int(rho[p])
        if p != q:
            assert (min(p, q), max(p, q)) in listed


def test_self_symmetry_pairs_are_unions_of_orbits():
    strip = shapes.grid_strip(6, 3, 3.0, 1.5)
    rho = half_turn(strip)
    sym0 = self_symmetry(decompose(all_pairs(strip), 20), 1, 0.0)
    s = sym0.embedding
    # threshold placed in the middle of a wide gap of the pairwise differences
    diffs = np.unique(np.round(np.abs(s[:, None] - s[None]).ravel(), 9))
    gaps = np.diff(diffs)
    k = int(np.argmax(gaps[: len(gaps) // 3]))
    eps = (diffs[k] + diffs[k + 1]) / 2
    pairs = {tuple(p) for p in close_pairs(s, eps).tolist()}
    assert pairs
    for p, q in pairs:
        a, b = int(rho[p]), int(rho[q])
        assert (min(a, b), max(a, b)) in pairs


def test_self_symmetry_eps_zero_generic_is_empty(bumpy_matrix):
    sym = self_symmetry(decompose(bumpy_matrix, 20), 20, 0.0)
    assert sym.pairs.shape == (0, 2)


def test_self_symmetry_threshold_and_canonical_form(bumpy_matrix):
    sym = self_symmetry(decompose(bumpy_matrix, 20), 20, 0.02)
    s = sym.embedding
    assert len(sym.pairs)
    assert np.all(sym.pairs[:, 0] < sym.pairs[:, 1])
    assert np.all(np.abs(s[sym.pairs[:, 0]] - s[sym.pairs[:, 1]]) <= 0.02)
    p, q = sym.pairs[0]
    assert q in sym.partners(p) and p in sym.partners(q)


def test_self_symmetry_k0_limits(bumpy_matrix):
    dec = decompose(bumpy_matrix, 25)
    with pytest.raises(K0OutOfRange):
        self_symmetry(dec, 21, 0.1)
    with pytest.raises(K0OutOfRange):
        self_symmetry(dec, 0, 0.1)


# ---------------------------------------------------------------- alignment

def test_self_alignment_is_identity(bumpy_matrix):
    dec = decompose(bumpy_matrix, 40)
    al = align_spectra(dec, dec, 20)
    np.testing.assert_array_equal(al.selection_x, np.arange(20))
    np.testing.assert_array_equal(al.selection_y, np.arange(20))
    assert np.all(al.signs == 1)
    assert correspondence_error(al).c_xy <= 1e-8
    assert al.objective <= 1e-12


def test_alignment_rigid_motion_and_permutation(bumpy, bumpy_matrix, rng):
    perm = rng.permutation(bumpy.n)
    moved = bumpy.transformed(shapes.random_rotation(3), [1.0, 2.0, -0.5], permutation=perm)
    a = decompose(bumpy_matrix, 40)
    b = decompose(all_pairs(moved), 40)
    # spectrum of the moved shape read in the original vertex labelling
    b_back = SpectralDecomposition(b.eigenvalues, b.eigenvectors[perm], b.ordering,
                                   b.source_fingerprint, b.frobenius)
    al = align_spectra(a, b_back, 20)
    np.testing.assert_array_equal(al.selection_y, np.arange(20))
    assert correspondence_error(al).per_order.max() <= 1e-6


def test_alignment_objective_recomputes():
    a, b = strip_pair(3, 4)
    da, db = decompose(all_pairs(a)), decompose(all_pairs(b))
    al = align_spectra(da, db, 5)
    gx, gy = al.gamma_x, al.gamma_y
    assert al.objective == pytest.approx(alignment_objective(al.aligned_x, al.aligned_y, gx, gy), abs=1e-9)
    # eigenvalue factors truncated to the k0 selected pairs
    m = al.aligned_x.T @ al.aligned_y
    lit = np.linalg.norm(m @ np.diag(gy)) + np.linalg.norm(m.T @ np.diag(gx))
    assert al.literal_objective == pytest.approx(lit, abs=1e-9)
    assert len(set(al.selection_x.tolist())) == 5
    assert len(set(al.selection_y.tolist())) == 5
    assert set(al.signs.tolist()) <= {-1, 1}


def brute_force(da, db, k0):
    """Lowest objective over every pairing of the candidate pools and every sign vector."""
    pool = min(2 * k0, da.k, db.k)
    best = np.inf
    first = tuple(range(k0))
    for side in (0, 1):
        for other in itertools.permutations(range(pool), k0):
            sx, sy = (first, other) if side == 0 else (other, first)
            order = np.argsort(sx, kind="stable")
            sx, sy = np.array(sx)[order], np.array(sy)[order]
            ax = da.eigenvectors[:, sx]
            for signs in itertools.product((1.0, -1.0), repeat=k0):
                ay = db.eigenvectors[:, sy] * np.array(signs)
                best = min(best, alignment_objective(ax, ay, da.eigenvalues[sx], db.eigenvalues[sy]))
    return best


@pytest.mark.parametrize("seeds, k0", [((3, 4), 2), ((3, 4), 3), ((5, 9), 3), ((1, 2), 1)])
def test_alignment_matches_brute_force(seeds, k0):
    a, b = strip_pair(*seeds)
    assert a.n <= 30
    da, db = decompose(all_pairs(a)), decompose(all_pairs(b))
    pool = 2 * k0
    assert all(len(blk) == 1 for blk in da.blocks()[:pool] + db.blocks()[:pool])
    al = align_spectra(da, db, k0)
    assert al.method == "exhaustive"
    assert al.objective == brute_force(da, db, k0)


def test_alignment_never_worse_than_identity():
    for seeds in [(3, 4), (5, 9), (11, 12)]:
        a, b = strip_pair(*seeds)
        da, db = decompose(all_pairs(a)), decompose(all_pairs(b))
        for k0 in (3, 10):
            al = align_spectra(da, db, k0)
            assert al.objective <= al.identity_objective + 1e-12


def test_alignment_is_symmetric_in_arguments():
    for seeds in [(3, 4), (5, 9)]:
        a, b = strip_pair(*seeds)
        da, db = decompose(all_pairs(a)), decompose(all_pairs(b))
        for k0 in (3, 10):
            xy = correspondence_error(align_spectra(da, db, k0)).c_xy
            yx = correspondence_error(align_spectra(db, da, k0)).c_xy
            assert xy == pytest.approx(yx, abs=1e-6)


def test_alignment_greedy_mode_runs():
    a, b = strip_pair(3, 4)
    da, db = decompose(all_pairs(a)), decompose(all_pairs(b))
    g = align_spectra(da, db, 3, method="greedy")
    e = align_spectra(da, db, 3, method="exhaustive")
    assert g.method == "greedy" and e.method == "exhaustive"
    assert e.objective <= g.objective + 1e-12
    assert g.objective <= g.identity_objective + 1e-12


def test_alignment_errors(bumpy_matrix, jitter_strip_matrix):
    a = decompose(bumpy_matrix, 20)
    with pytest.raises(ShapeMismatch):
        align_spectra(a, decompose(jitter_strip_matrix, 20), 3)
    with pytest.raises(K0OutOfRange):
        align_spectra(a, a, 21)
    with pytest.raises(ValueError):
        align_spectra(a, a, 3, method="annealing")


def test_literal_objective_vanishes_on_orthogonal_selection():
    # why the literal form cannot serve as the alignment criterion
    e = np.eye(4)
    assert literal_objective(e[:, :2], e[:, 2:], np.ones(2), np.ones(2)) == 0.0
    assert alignment_objective(e[:, :2], e[:, 2:], np.ones(2), np.ones(2)) > 0.0


# ---------------------------------------------------------------- error and stability

def aligned_from(x, y):
    k = x.shape[1]
    one = np.ones(k)
    return AlignedSpectra(k, np.arange(k), np.arange(k), np.ones(k, dtype=np.int64), x, y,
                          one, one, 0.0, 0.0, "exhaustive", 0.0)


def test_flipped_pair_contributes_two():
    x = np.eye(5)[:, :3]
    y = x.copy()
    y[:, 1] *= -1
    r = correspondence_error(aligned_from(x, y))
    np.testing.assert_allclose(r.per_order, [0.0, 2.0, 0.0])
    assert r.c_xy == pytest.approx(2.0)
    assert r.variants() == {"raw": r.c_xy, "per_k0": r.c_xy / 3, "per_n": r.c_xy / 5}


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_correspondence_invariants(seed):
    rng = np.random.default_rng(seed)
    r = correspondence_error(aligned_from(rng.normal(size=(7, 3)), rng.normal(size=(7, 3))))
    assert r.c_xy == pytest.approx(r.per_order.sum(), abs=1e-9)
    assert np.all(r.per_order >= 0) and np.all(r.per_vertex >= 0)


def test_stable_identical_shapes(bumpy_matrix):
    dec = decompose(bumpy_matrix, 40)
    al = align_spectra(dec, dec, 20)
    reg = stable_regions(al, correspondence_error(al), 1e-3)
    assert reg.mask.all()
    assert reg.score <= 1e-6


def test_stable_eps_zero_distinct_shapes():
    a, b = strip_pair(3, 4)
    al = align_spectra(decompose(all_pairs(a)), decompose(all_pairs(b)), 5)
    corr = correspondence_error(al)
    reg = stable_regions(al, corr, 0.0)
    assert not reg.mask.any()
    assert reg.score == 0.0


def test_stable_monotone_and_score():
    a, b = strip_pair(3, 4)
    al = align_spectra(decompose(all_pairs(a)), decompose(all_pairs(b)), 5)
    corr = correspondence_error(al)
    prev = None
    for eps in np.linspace(0.0, corr.per_vertex.max(), 7):
        reg = stable_regions(al, corr, eps)
        assert reg.score == pytest.approx(corr.per_vertex[reg.mask].sum(), abs=1e-9)
        assert np.all(corr.per_vertex[reg.mask] <= eps)
        if prev is not None:
            assert np.all(reg.mask >= prev)
        prev = reg.mask
    assert prev.all()


def test_mask_components():
    strip = shapes.grid_strip(4, 1, 4.0, 1.0)
    x = strip.vertices[:, 0]
    mask = (x < 0.5) | (x > 2.5)
    labels = mask_components(strip, mask)
    assert np.all(labels[~mask] == -1)
    assert set(labels[x < 0.5]) == {0}
    assert set(labels[x > 2.5]) == {1}
    assert np.all(mask_components(strip, np.zeros(strip.n, dtype=bool)) == -1)
