"""Command line: every experiment as a subcommand that writes CSV."""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys

import numpy as np

from . import experiments as ex
from .config import ExperimentConfig, ExperimentError, parse_int_list
from .mesh import MeshError, save_mesh


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.17g}"
    return str(v)


def render_csv(result: ex.ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns)
    for row in result.rows:
        w.writerow([format_value(row[c]) for c in result.columns])
    return buf.getvalue()


def write_csv(result: ex.ExperimentResult, out: str | None) -> None:
    # rendered in full before anything touches the output, so failures leave no partial file
    text = render_csv(result)
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _common(p: argparse.ArgumentParser, geometry="lshape", refinement=64, ranks="2..9"):
    p.add_argument("--geometry", choices=["lshape", "cube", "file"], default=geometry)
    p.add_argument("--refinement", type=int, default=refinement,
                   help="L-shape: 8*R elements; cube: 12*R^2 triangles")
    p.add_argument("--mesh", dest="mesh_file", help="mesh file for --geometry file")
    p.add_argument("--scale", type=float, default=None,
                   help="geometry scale (default 0.5 for the L-shape, 1 for the cube)")
    p.add_argument("--eta", type=float, default=2.0)
    p.add_argument("--n-leaf", type=int, default=25)
    p.add_argument("--ranks", default=ranks, help="e.g. 2..9 or 5,10,20")
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--tol", type=float, default=1e-6, help="power-iteration relative tolerance")
    p.add_argument("--out", default=None, help="CSV path (stdout if omitted)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--max-dense-n", type=int, default=4096)
    p.add_argument("--no-timing", action="store_true", help="write 0 for wall_seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hbem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inverse", help="compress V^-1 and measure ||I - V W_H||_2")
    _common(p)
    p.add_argument("--storage-only", action="store_true", help="clustering-only storage count, no dense build")

    _common(sub.add_parser("cholesky", help="H-Cholesky factor errors"))
    _common(sub.add_parser("3d", help="inverse compression on the cube surface"),
            geometry="cube", refinement=8, ranks="5,10,20,30")
    _common(sub.add_parser("mesh", help="mesh statistics"))
    p = sub.choices["mesh"]
    p.add_argument("--save", help="also write the mesh in text format")
    _common(sub.add_parser("cluster", help="cluster tree and partition statistics"))
    p = sub.add_parser("assemble", help="assemble V and report symmetry/SPD")
    _common(p)
    p.add_argument("--dump", help="binary dump of V")
    p = sub.add_parser("schur", help="singular values of admissible Schur-complement blocks")
    _common(p)
    p.add_argument("--min-level", type=int, default=2)
    p.add_argument("--max-k", type=int, default=20)
    _common(sub.add_parser("h2", help="H versus H^2 compression of V^-1"), refinement=128)

    p = sub.add_parser("kernel-decay", help="Chebyshev degenerate-kernel error against k")
    p.add_argument("--dim", type=int, choices=[2, 3], default=2)
    p.add_argument("--k", default="1..8")
    p.add_argument("--dist-ratio", type=float, default=1.0, help="dist(x, box) / diam(box)")
    p.add_argument("--samples", type=int, default=None, help="sample points per axis")
    p.add_argument("--out", default=None)
    return parser


def config_from_args(args) -> ExperimentConfig:
    scale = args.scale
    if scale is None:
        scale = 1.0 if args.geometry == "cube" else 0.5
    return ExperimentConfig(
        geometry=args.geometry, refinement=args.refinement, scale=scale, mesh_file=args.mesh_file,
        eta=args.eta, n_leaf=args.n_leaf, ranks=parse_int_list(args.ranks), seed=args.seed,
        tol=args.tol, threads=args.threads, max_dense_n=args.max_dense_n,
        storage_only=getattr(args, "storage_only", False), timing=not args.no_timing,
    )


def run(args) -> ex.ExperimentResult:
    if args.command == "kernel-decay":
        return ex.run_kernel_decay(args.dim, parse_int_list(args.k), args.dist_ratio, args.samples)
    cfg = config_from_args(args)
    if args.command == "inverse":
        return ex.run_inverse_experiment(cfg)
    if args.command == "cholesky":
        return ex.run_cholesky_experiment(cfg)
    if args.command == "3d":
        return ex.run_3d_experiment(cfg)
    if args.command == "mesh":
        if args.save:
            save_mesh(ex.make_mesh(cfg), args.save)
        return ex.run_mesh(cfg)
    if args.command == "cluster":
        return ex.run_cluster(cfg)
    if args.command == "assemble":
        return ex.run_assemble(cfg, args.dump)
    if args.command == "schur":
        return ex.run_schur_profile(cfg, args.min_level, args.max_k)
    if args.command == "h2":
        return ex.run_h2_experiment(cfg)
    raise ExperimentError(f"unknown command {args.command}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)   # exits with 2 on usage errors
    try:
        result = run(args)
        write_csv(result, args.out)
    except (ExperimentError, MeshError, ValueError, np.linalg.LinAlgError, OSError) as exc:
        print(f"hbem {args.command}: error: {exc}", file=sys.stderr)
        return 1
    for name, value in result.fits.items():
        print(f"# {name} = {value:.6g}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
