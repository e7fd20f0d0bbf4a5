"""Command-line front end: ``quasigeo <command> MESH [MESH] [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import EXIT_CODES, EXIT_FILE_NOT_FOUND, EXIT_IO, EXIT_USAGE, QuasiGeoError
from .mesh import load_mesh, write_scalar_field

logger = logging.getLogger("quasigeo")

ARITY = {"distances": 1, "spectrum": 1, "symmetry": 1, "correspond": 2, "stable": 2, "eval": 2}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    d = RunConfig(cache_dir=None)
    p = _Parser(prog="quasigeo", description="All-pairs quasi-geodesic shape operator and its spectra.")
    p.add_argument("--version", action="version", version=f"quasigeo {__version__}")
    p.add_argument("command", choices=sorted(ARITY))
    p.add_argument("meshes", nargs="+", metavar="MESH",
                   help="mesh file (OFF, ascii PLY) or TOSCA basename / .vert file")
    p.add_argument("--tol", type=float, default=d.tol, help="straightening tolerance [rad]")
    p.add_argument("--max-iter", type=int, default=d.max_iter, help="straightening passes")
    p.add_argument("--k0", type=int, default=d.k0, help="number of eigenpairs used")
    p.add_argument("--ordering", choices=("abs-desc", "alg-desc"), default=d.ordering)
    p.add_argument("--eps-mode", choices=("variance", "config"), default=d.eps_mode)
    p.add_argument("--eps", type=float, default=d.eps,
                   help="epsilon itself (config mode) or its scale (variance mode)")
    p.add_argument("--threshold", type=float, default=d.threshold,
                   help="error threshold for %% correspondence (eval)")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--cache-dir", default=None,
                   help="distance cache directory (default $QUASIGEO_CACHE_DIR or .quasigeo-cache)")
    p.add_argument("--no-cache", action="store_true", help="do not read or write the distance cache")
    p.add_argument("--out", default=d.out, help="output directory")
    p.add_argument("--seed", type=int, default=d.seed, help="seed for sampled epsilon estimation")
    p.add_argument("--format", default=d.format, choices=("auto", "OFF", "PLY-ascii", "TOSCA-vert-tri"),
                   help="input mesh format")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    kw = dict(
        tol=args.tol, max_iter=args.max_iter, k0=args.k0, ordering=args.ordering,
        eps_mode=args.eps_mode, eps=args.eps, threads=args.threads, out=args.out,
        seed=args.seed, format=args.format, threshold=args.threshold, figures=not args.no_figures,
    )
    if args.no_cache:
        kw["cache_dir"] = None
    elif args.cache_dir is not None:
        kw["cache_dir"] = args.cache_dir
    try:
        return RunConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------- writers

def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_plain)
        fh.write("\n")


def _plain(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _write_matrix_csv(path, d):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(d):
            w.writerow([repr(float(x)) for x in row])


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------- pipeline

class Run:
    """One command invocation; collects written artifact paths."""

    def __init__(self, cfg: RunConfig, paths):
        self.cfg = cfg
        self.out = cfg.out_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.meshes = [load_mesh(p, cfg.format) for p in paths]
        self.artifacts = []

    def path(self, name):
        p = self.out / name
        self.artifacts.append(str(p))
        return p

    def distances(self, mesh):
        from .geodesic import cached_all_pairs

        cfg = self.cfg
        return cached_all_pairs(mesh, cfg.cache_dir, cfg.tol, cfg.max_iter, cfg.threads)

    def spectrum(self, matrix):
        from .spectrum import decompose

        return decompose(matrix, min(2 * self.cfg.k0, matrix.n), self.cfg.ordering)

    def record(self, **fields):
        return {"config": self.cfg.to_dict(), "version": __version__, **fields}

    def figure(self, fn, *args, name):
        if self.cfg.figures:
            fn(*args, self.path(name))


def cmd_distances(run: Run):
    from .plotting import plot_distance_matrix

    (mesh,) = run.meshes
    g = run.distances(mesh)
    _write_matrix_csv(run.path(f"{mesh.name}.distances.csv"), g.d)
    _write_json(run.path(f"{mesh.name}.distances.json"), run.record(
        mesh=mesh.name, n=g.n, mesh_fingerprint=g.mesh_fingerprint,
        matrix_fingerprint=g.fingerprint, unconverged_paths=g.unconverged,
        max_distance=float(g.d.max()),
    ))
    run.figure(plot_distance_matrix, g.d, name=f"{mesh.name}.distances.png")


def cmd_spectrum(run: Run):
    from .plotting import plot_field, plot_spectrum
    from .spectrum import residuals, write_eigenvalues_csv

    (mesh,) = run.meshes
    g = run.distances(mesh)
    sd = run.spectrum(g)
    write_eigenvalues_csv(sd, run.path(f"{mesh.name}.eigenvalues.csv"))
    _write_rows(run.path(f"{mesh.name}.eigenvectors.csv"),
                [f"phi{k}" for k in range(1, sd.k + 1)],
                [[repr(float(x)) for x in row] for row in sd.eigenvectors])
    for k in range(min(sd.k, 3)):
        write_scalar_field(mesh, sd.eigenvectors[:, k], run.path(f"{mesh.name}.phi{k + 1}.ply"))
    _write_json(run.path(f"{mesh.name}.spectrum.json"), run.record(
        mesh=mesh.name, n=sd.n, k=sd.k, eigenvalues=sd.eigenvalues,
        max_residual_rel=float(residuals(sd, g).max() / max(sd.frobenius, 1e-300)),
        matrix_fingerprint=g.fingerprint,
    ))
    run.figure(plot_spectrum, sd.eigenvalues, name=f"{mesh.name}.spectrum.png")
    if sd.k >= 2:
        run.figure(plot_field, mesh, sd.eigenvectors[:, 1], name=f"{mesh.name}.phi2.png")


def cmd_symmetry(run: Run):
    from .analysis import epsilon_bound, self_symmetry
    from .plotting import plot_embedding_pairs, plot_field

    (mesh,) = run.meshes
    cfg = run.cfg
    g = run.distances(mesh)
    sd = run.spectrum(g)
    k0 = min(cfg.k0, sd.k)
    eps = epsilon_bound(g, None, cfg.eps_mode, cfg.eps, seed=cfg.seed, k0=k0, ordering=cfg.ordering)
    sym = self_symmetry(sd, k0, eps)
    _write_rows(run.path(f"{mesh.name}.symmetry_pairs.csv"), ["p", "q"], sym.pairs.tolist())
    write_scalar_field(mesh, sym.embedding, run.path(f"{mesh.name}.embedding.ply"))
    if sd.k >= 2:
        write_scalar_field(mesh, sd.eigenvectors[:, 1], run.path(f"{mesh.name}.phi2.ply"))
    _write_json(run.path(f"{mesh.name}.symmetry.json"), run.record(
        mesh=mesh.name, n=mesh.n, k0=k0, epsilon=eps.epsilon, epsilon_method=eps.method,
        pair_count=int(len(sym.pairs)), paired_vertex_count=int(np.unique(sym.pairs).size),
    ))
    run.figure(plot_embedding_pairs, sym.embedding, sym.pairs, name=f"{mesh.name}.symmetry.png")
    if sd.k >= 2:
        run.figure(plot_field, mesh, sd.eigenvectors[:, 1], name=f"{mesh.name}.phi2.png")


def _pair_setup(run: Run):
    from .analysis import align_spectra, correspondence_error

    mx, my = run.meshes
    gx, gy = run.distances(mx), run.distances(my)
    dx, dy = run.spectrum(gx), run.spectrum(gy)
    k0 = min(run.cfg.k0, dx.k, dy.k)
    aligned = align_spectra(dx, dy, k0)
    return mx, my, gx, gy, aligned, correspondence_error(aligned)


def _alignment_fields(aligned, corr):
    return dict(
        k0=aligned.k0, selection_x=aligned.selection_x, selection_y=aligned.selection_y,
        signs=aligned.signs, objective=aligned.objective,
        literal_objective=aligned.literal_objective, search=aligned.method,
        c_xy=corr.variants(), per_order=corr.per_order,
    )


def cmd_correspond(run: Run):
    from .plotting import plot_field, plot_per_order

    mx, my, gx, gy, aligned, corr = _pair_setup(run)
    stem = f"{mx.name}__{my.name}"
    write_scalar_field(mx, corr.per_vertex, run.path(f"{stem}.error_x.ply"))
    write_scalar_field(my, corr.per_vertex, run.path(f"{stem}.error_y.ply"))
    for k in range(min(aligned.k0, 3)):
        write_scalar_field(mx, aligned.aligned_x[:, k], run.path(f"{stem}.phi{k + 1}_x.ply"))
        write_scalar_field(my, aligned.aligned_y[:, k], run.path(f"{stem}.phi{k + 1}_y.ply"))
    _write_json(run.path(f"{stem}.correspond.json"), run.record(
        shape_x=mx.name, shape_y=my.name, n=mx.n, **_alignment_fields(aligned, corr),
    ))
    run.figure(plot_per_order, corr.per_order, name=f"{stem}.per_order.png")
    run.figure(plot_field, mx, corr.per_vertex, name=f"{stem}.error_x.png")


def cmd_stable(run: Run):
    from .analysis import epsilon_bound, mask_components, stable_regions
    from .plotting import plot_field

    cfg = run.cfg
    mx, my, gx, gy, aligned, corr = _pair_setup(run)
    eps = epsilon_bound(gx, gy, cfg.eps_mode, cfg.eps, seed=cfg.seed)
    st = stable_regions(aligned, corr, eps)
    labels = mask_components(mx, st.mask)
    stem = f"{mx.name}__{my.name}"
    write_scalar_field(mx, st.mask.astype(float), run.path(f"{stem}.stable.ply"))
    _write_rows(run.path(f"{stem}.stable.csv"), ["vertex", "per_vertex", "stable", "component"],
                [[i, repr(float(e)), int(m), int(c)]
                 for i, (e, m, c) in enumerate(zip(corr.per_vertex, st.mask, labels))])
    _write_json(run.path(f"{stem}.stable.json"), run.record(
        shape_x=mx.name, shape_y=my.name, n=mx.n, epsilon=eps.epsilon, epsilon_method=eps.method,
        score=st.score, stable_fraction=st.fraction, component_count=int(labels.max() + 1),
        **_alignment_fields(aligned, corr),
    ))
    run.figure(plot_field, mx, st.mask.astype(float), name=f"{stem}.stable.png")


def cmd_eval(run: Run):
    from .evaluation import EvalReport, evaluate_pair, write_curve_csv, write_report_csv, write_report_json
    from .plotting import plot_cumulative

    cfg = run.cfg
    mx, my = run.meshes
    gx, gy = run.distances(mx), run.distances(my)
    rec, extra = evaluate_pair(mx, my, gx, gy, k0=cfg.k0, ordering=cfg.ordering,
                               eps_mode=cfg.eps_mode, eps_scale=cfg.eps, seed=cfg.seed,
                               threshold=cfg.threshold)
    report = EvalReport([rec], cfg.to_dict())
    stem = f"{mx.name}__{my.name}"
    write_report_json(report, run.path(f"{stem}.eval.json"))
    write_report_csv(report, run.path(f"{stem}.eval.csv"))
    t = np.array([c[0] for c in rec.curve])
    pc = np.array([c[1] for c in rec.curve])
    write_curve_csv(t, pc, run.path(f"{stem}.curve.csv"))
    _write_rows(run.path(f"{stem}.map.csv"), ["vertex", "target"], list(enumerate(extra["map"].tolist())))
    logger.info("eval runtime %.2fs", extra["runtime_s"])
    run.figure(plot_cumulative, t, pc, name=f"{stem}.curve.png")


COMMANDS = {
    "distances": cmd_distances, "spectrum": cmd_spectrum, "symmetry": cmd_symmetry,
    "correspond": cmd_correspond, "stable": cmd_stable, "eval": cmd_eval,
}


def _fail(kind, message, code):
    rec = {"error": kind, "message": message, "exit_code": code}
    sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
        if len(args.meshes) != ARITY[args.command]:
            raise UsageError(f"{args.command} takes {ARITY[args.command]} mesh(es), got {len(args.meshes)}")
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = Run(cfg, args.meshes)
        COMMANDS[args.command](run)
    except QuasiGeoError as exc:
        return _fail(type(exc).__name__, str(exc), exc.exit_code)
    except FileNotFoundError as exc:
        return _fail("FileNotFoundError", str(exc), EXIT_FILE_NOT_FOUND)
    except OSError as exc:
        return _fail("OSError", str(exc), EXIT_IO)
    for a in run.artifacts:
        print(a)
    return EXIT_CODES["ok"]


if __name__ == "__main__":
    sys.exit(main())
