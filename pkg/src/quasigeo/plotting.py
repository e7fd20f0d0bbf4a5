"""Figures for the command-line reports.

All functions draw on a fresh figure, save it and close it.  PNGs are
written without the software/date metadata so repeated runs give identical
bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import LinearSegmentedColormap  # noqa: E402

from .mesh import COLOR_RAMP, TriangleMesh  # noqa: E402

RAMP_CMAP = LinearSegmentedColormap.from_list(
    "quasigeo", [(x, tuple(c / 255 for c in rgb)) for x, rgb in COLOR_RAMP]
)
_STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 120,
}


def _save(fig, path):
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def plot_distance_matrix(d, path, title="quasi-geodesic distances"):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.4, 3.8))
        im = ax.imshow(np.asarray(d), cmap="viridis", interpolation="nearest")
        fig.colorbar(im, ax=ax, shrink=0.85, label="distance")
        ax.set_title(title)
        ax.set_xlabel("vertex")
        ax.set_ylabel("vertex")
        fig.tight_layout()
        _save(fig, path)


def plot_spectrum(eigenvalues, path, title="leading eigenvalues"):
    g = np.asarray(eigenvalues)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.8, 3.0))
        idx = np.arange(1, g.size + 1)
        ax.bar(idx, g, color=np.where(g >= 0, "#b40426", "#3b4cc0"), width=0.7)
        ax.axhline(0.0, color="0.3", lw=0.6)
        ax.set_xlabel("order k")
        ax.set_ylabel(r"$\gamma_k$")
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def plot_field(mesh: TriangleMesh, field, path, title="", elev=20.0, azim=-60.0):
    """Mesh surface coloured by a per-vertex field (face colour = vertex mean)."""
    f = np.asarray(field, dtype=np.float64)
    lo, hi = f.min(), f.max()
    norm = (f - lo) / (hi - lo) if hi - lo > 1e-12 else np.full_like(f, 0.5)
    face_val = norm[mesh.faces].mean(axis=1)
    with plt.rc_context(_STYLE):
        fig = plt.figure(figsize=(4.2, 4.0))
        ax = fig.add_subplot(projection="3d")
        v = mesh.vertices
        surf = ax.plot_trisurf(v[:, 0], v[:, 1], v[:, 2], triangles=mesh.faces,
                               linewidth=0.0, antialiased=False, shade=False)
        surf.set_facecolor(RAMP_CMAP(face_val))
        ax.view_init(elev=elev, azim=azim)
        span = np.ptp(v, axis=0).max() / 2
        mid = (v.max(axis=0) + v.min(axis=0)) / 2
        ax.set(xlim=(mid[0] - span, mid[0] + span), ylim=(mid[1] - span, mid[1] + span),
               zlim=(mid[2] - span, mid[2] + span))
        ax.set_axis_off()
        if title:
            ax.set_title(title)
        sm = plt.cm.ScalarMappable(cmap=RAMP_CMAP, norm=plt.Normalize(lo, hi))
        fig.colorbar(sm, ax=ax, shrink=0.6)
        _save(fig, path)


def plot_embedding_pairs(embedding, pairs, path, title="embedding sum"):
    """Sorted embedding sum with the symmetric-candidate vertices highlighted."""
    s = np.asarray(embedding)
    order = np.argsort(s, kind="stable")
    hit = np.zeros(s.size, dtype=bool)
    if len(pairs):
        hit[np.unique(np.asarray(pairs).ravel())] = True
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.8, 3.0))
        rank = np.arange(s.size)
        ax.plot(rank, s[order], color="0.4", lw=0.8)
        ax.scatter(rank[hit[order]], s[order][hit[order]], s=6, color="#b40426", zorder=3,
                   label="in a candidate pair")
        ax.set_xlabel("vertex rank")
        ax.set_ylabel("embedding sum")
        ax.set_title(title)
        if hit.any():
            ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def plot_per_order(per_order, path, title="per-order correspondence error"):
    e = np.asarray(per_order)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.8, 3.0))
        ax.bar(np.arange(1, e.size + 1), e, color="#3b4cc0", width=0.7)
        ax.set_xlabel("order k")
        ax.set_ylabel(r"$\|\bar\Phi_X^k - \bar\Phi_Y^k\|_2$")
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def plot_cumulative(thresholds, percent, path, title="cumulative correspondence"):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.4, 3.2))
        ax.step(np.asarray(thresholds), np.asarray(percent), where="post", color="#b40426")
        ax.set_xlabel("normalised geodesic error")
        ax.set_ylabel("% correspondence")
        ax.set_ylim(0, 101)
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)
