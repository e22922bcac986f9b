"""Command-line front end: ``rbfrank <subcommand> [options]``.

Every output file carries its full configuration (plus seed, generator id and
package version) as ``# key: value`` comment lines in CSV or a ``metadata``
object in JSON; ``--from-metadata FILE`` re-runs that configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import nullcontext
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, indexcomb
from . import io as rio
from .cheb1d import Analytic, FiniteSmooth, auto_analytic, bound_analytic, bound_finite_smooth, builtin_profile
from .cheb_factor import build_cheb_plan, prune_plan
from .concentration import bernstein_probability, prob_bound_analytic, prob_bound_finite, uniform_params
from .errors import ConstraintError, RBFRankError, ResourceError
from .fourier_taylor import build_ft_plan, ft_error_bound, periodize
from .pointgen import GENERATOR_ID, PointCloud, grid_search_p, make_rng, sample, scenario_clouds
from . import spectrum as spec

DEFAULT_N = 1000
N_CAP = spec.DEFAULT_MAX_N


# ----------------------------------------------------------------- helpers

def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            lo, hi = part.split(":")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _strs(text: str) -> list:
    return [v.strip() for v in text.split(",") if v.strip()]


def _metadata(args) -> dict:
    return {
        "version": __version__,
        "generator": GENERATOR_ID,
        "seed": getattr(args, "seed", None),
        "config": {"argv": args._argv},
    }


def _meta_lines(meta: dict) -> str:
    return "".join(f"# {k}: {json.dumps(v, sort_keys=True)}\n" for k, v in meta.items())


def write_csv(path: Path, header: Sequence[str], rows, meta: dict) -> None:
    with open(path, "w") as fh:
        fh.write(_meta_lines(meta))
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return str(v)


def read_metadata(path) -> dict:
    """Metadata block of a file written by this tool (CSV comments or JSON)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return json.loads(text)["metadata"]
    meta = {}
    for line in text.splitlines():
        if not line.startswith("# "):
            break
        key, _, value = line[2:].partition(": ")
        meta[key] = json.loads(value)
    return meta


def _check_n(N: int, args) -> None:
    if N > N_CAP and not args.unsafe_n:
        raise ResourceError(f"N={N} exceeds the default cap {N_CAP}; pass --unsafe-n to override")


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _threads(args):
    if not args.threads:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=args.threads)


# ----------------------------------------------------------------- factorize

def cmd_factorize(args) -> dict:
    out = _out(args)
    profile = builtin_profile(args.profile, h=args.h, D=args.D)
    X = PointCloud.load(args.points) if args.points else None
    Y = PointCloud.load(args.points_y) if args.points_y else X
    if args.construction == "cheb":
        if args.rho_sq is not None:
            profile = builtin_profile(args.profile, h=args.h, D=args.D,
                                      smoothness=Analytic(args.rho_sq, args.C))
        elif args.vq is not None:
            profile = builtin_profile(args.profile, h=args.h, D=args.D,
                                      smoothness=FiniteSmooth(args.q, args.vq))
        plan = build_cheb_plan(profile, args.n, args.d)
        if args.prune is not None:
            if X is None:
                raise ConstraintError("--prune needs --points")
            plan = prune_plan(plan, X, Y, args.prune)
    else:
        pp = periodize(profile, args.window_order)
        x_c = X.center if X is not None else np.zeros(args.d)
        y_c = Y.center if Y is not None else np.zeros(args.d)
        D_x = args.dx if args.dx is not None else (X.box_diameter if X is not None else None)
        D_y = args.dy if args.dy is not None else (Y.box_diameter if Y is not None else None)
        plan = build_ft_plan(pp, args.mf, args.mt, x_c, y_c, enforce_ratio=not args.no_enforce_ratio,
                             D_x=D_x, D_y=D_y, q=args.q, V_q=args.vq)
    meta = _metadata(args)
    payload = plan.to_dict()
    payload["metadata"] = {**payload.get("metadata", {}), **meta}
    rio.write_json(out / "plan.json", payload)
    report = {
        "construction": plan.construction,
        "declared_rank": plan.declared_rank,
        "retained_rank": plan.rank,
        "error_bound": plan.error_bound,
    }
    if X is not None:
        G, H = plan.factor_matrices(X, Y)
        K = profile(spec.cdist(X.points, Y.points, "sqeuclidean"))
        report["empirical_max_error"] = float(np.abs(G @ H.T - K).max(initial=0.0))
        header = [f"term_{i}" for i in range(G.shape[1])]
        if args.factor_format == "bin":
            rio.write_matrix_binary(out / "G.bin", G)
            rio.write_matrix_binary(out / "H.bin", H)
        else:
            rio.write_matrix_csv(out / "G.csv", G, header)
            rio.write_matrix_csv(out / "H.csv", H, header)
    rio.write_json(out / "report.json", {**report, "metadata": meta})
    return report


# ----------------------------------------------------------------- bounds

BOUNDS_HEADER = ["construction", "n", "M_f", "M_t", "rank", "deterministic_bound",
                 "delta", "prob_bound", "probability", "vacuous"]


def bounds_rows(args) -> list:
    rows = []
    profile = builtin_profile(args.profile, h=args.h, D=args.D)
    deltas = _floats(args.delta) if args.delta else []
    params = uniform_params(args.d, args.D / math.sqrt(args.d), args.D) if deltas else None
    for n in _ints(args.n_list) if args.n_list else []:
        if args.vq is not None:
            det = bound_finite_smooth(args.vq, args.D, args.q, n)
            smooth = None
        else:
            if args.rho_sq is not None:
                smooth = Analytic(args.rho_sq, args.C)
            else:
                smooth = auto_analytic(profile.f, profile.interval, n)
            det = bound_analytic(smooth.rho_sq, smooth.C, n)
        rank = indexcomb.rank_chebyshev(n, args.d)
        if not deltas:
            rows.append(["cheb", n, "", "", rank, det, "", "", "", ""])
        for delta in deltas:
            if smooth is None:
                pb = prob_bound_finite(args.vq, delta, args.q, n)
            else:
                try:
                    pb = prob_bound_analytic(smooth.C, args.D, delta, smooth.rho_sq, n)
                except ConstraintError:
                    pb = math.nan
            prob = bernstein_probability(delta, params)
            rows.append(["cheb", n, "", "", rank, det, delta, pb, prob.value, int(prob.vacuous)])
    for pair in _strs(args.ft) if args.ft else []:
        mf, mt = (int(v) for v in pair.split(":"))
        pp = periodize(profile, args.window_order)
        vq = args.vq if args.vq is not None else pp.total_variation(args.q)
        nf = args.norm_f if args.norm_f is not None else pp.sup_norm()
        b = ft_error_bound(nf, args.dx, args.dy, args.D, mt, vq, args.q, mf)
        rows.append(["ft", "", mf, mt, indexcomb.rank_fourier_taylor(mf, mt, args.d), b.total,
                     "", "", "", ""])
    return rows


def cmd_bounds(args) -> list:
    out = _out(args)
    rows = bounds_rows(args)
    meta = _metadata(args)
    if args.format == "json":
        rio.write_json(out / "bounds.json", {"rows": [dict(zip(BOUNDS_HEADER, r)) for r in rows], "metadata": meta})
    else:
        write_csv(out / "bounds.csv", BOUNDS_HEADER, rows, meta)
    return rows


# ----------------------------------------------------------------- rank sweep

SWEEP_HEADER = ["d", "scheme", "tol", "norm", "rank", "mean", "std"]


def _sweep_ranks(scheme, d, N, seed, p, scenario, profile, bw, tols, norms):
    X, Y = scenario_clouds(scenario, scheme, N, d, seed, p)
    K = spec.assemble(X, Y, profile, bw).entries
    U, s, Vt = spec.svd(K)
    return {(tol, norm): spec.numerical_rank(K, tol, norm, (U, s, Vt)) for tol in tols for norm in norms}


def rank_sweep_rows(args, meta: Optional[dict] = None) -> list:
    _check_n(args.N, args)
    tols, norms = _floats(args.tol), _strs(args.norm)
    rows = []
    chosen = {}
    for d in _ints(args.d_list):
        for scheme in _strs(args.scheme):
            p = args.p
            if scheme == "endpoint" and args.grid_search_p:
                tol0 = min(tols)
                p, ranks = grid_search_p(lambda pp: _sweep_ranks(
                    scheme, d, args.N, args.seed, pp, args.scenario, args.profile, args.bandwidth,
                    [tol0], ["max"])[(tol0, "max")])
                chosen[str(d)] = p
            per_seed = [_sweep_ranks(scheme, d, args.N, args.seed + r, p, args.scenario, args.profile,
                                     args.bandwidth, tols, norms) for r in range(args.repeats)]
            for tol in tols:
                for norm in norms:
                    vals = [res[(tol, norm)] for res in per_seed]
                    rows.append([d, scheme, tol, norm, ";".join(map(str, vals)),
                                 float(np.mean(vals)), float(np.std(vals))])
    if meta is not None and chosen:
        meta["grid_search_p"] = chosen
    return rows


def cmd_rank_sweep(args) -> list:
    out = _out(args)
    meta = _metadata(args)
    rows = rank_sweep_rows(args, meta)
    if args.format == "json":
        rio.write_json(out / "rank_sweep.json", {"rows": [dict(zip(SWEEP_HEADER, r)) for r in rows], "metadata": meta})
    else:
        write_csv(out / "rank_sweep.csv", SWEEP_HEADER, rows, meta)
    return rows


# ----------------------------------------------------------------- spectrum

def _matrix_from_args(args):
    if args.matrix:
        return rio.read_matrix(args.matrix), None
    _check_n(args.N, args)
    X = sample(args.scheme, args.N, args.d, args.seed, args.p)
    return spec.assemble(X, X, args.profile, args.bandwidth).entries, X


def cmd_spectrum(args):
    out = _out(args)
    K, _ = _matrix_from_args(args)
    d = args.d
    report = spec.spectrum_report(K, d, _floats(args.tol), _strs(args.norm), _floats(args.thresholds),
                                  args.k_max)
    meta = _metadata(args)
    report.metadata = meta
    rio.write_json(out / "spectrum.json", report.to_dict())
    s = report.singular_values
    ratios, floored = spec.singular_ratios(s)
    rows = [[i + 1, float(s[i]), float(ratios[i]) if i < len(ratios) else ""] for i in range(len(s))]
    write_csv(out / "singular_values.csv", ["index", "sigma", "ratio_next"], rows, meta)
    return report


# ----------------------------------------------------------------- reconstruct

def cmd_reconstruct(args) -> list:
    out = _out(args)
    K, _ = _matrix_from_args(args)
    ranks = _ints(args.ranks)
    methods = _strs(args.methods)
    rows = []
    for method in methods:
        if method == "svd":
            rows += spec.reconstruction_curve(K, ranks, ["svd"])
            continue
        runs = [spec.reconstruction_curve(K, ranks, [method], seed=args.seed + r,
                                          oversample=args.oversample, power_iters=args.power_iters)
                for r in range(args.repeats)]
        for i, r in enumerate(ranks):
            rows.append((r, method, float(np.mean([run[i][2] for run in runs]))))
    meta = _metadata(args)
    write_csv(out / "curve.csv", ["rank", "method", "rel_fro_error"], rows, meta)
    return rows


# ----------------------------------------------------------------- sample

def cmd_sample(args) -> list:
    out = _out(args)
    _check_n(args.N, args)
    ext = "bin" if args.format == "bin" else "csv"
    if args.scenario:
        X, Y = scenario_clouds(args.scenario, args.scheme, args.N, args.d, args.seed, args.p)
        clouds = [("points_x", X), ("points_y", Y)]
    else:
        box = tuple(_floats(args.box)) if args.box else None
        clouds = [("points", sample(args.scheme, args.N, args.d, args.seed, args.p, box, args.offset))]
    paths = []
    for name, cloud in clouds:
        cloud.metadata.update(_metadata(args))
        paths.append(cloud.save(out / f"{name}.{ext}", ext))
    return paths


# ----------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out", default=".")
    p.add_argument("--format", default="csv", choices=["csv", "json", "bin"])
    p.add_argument("--threads", type=int, default=0, help="cap on BLAS worker threads")
    p.add_argument("--unsafe-n", action="store_true", help=f"allow N above {N_CAP}")
    p.add_argument("--from-metadata", help="re-run the configuration stored in a previous output")


def _data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--profile", default="gaussian", choices=["gaussian", "cauchy"])
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--N", type=int, default=DEFAULT_N)
    p.add_argument("--scheme", default="endpoint")
    p.add_argument("--p", type=float, default=0.0, help="endpoint mass per end")
    p.add_argument("--bandwidth", default="sqrt-d", help="sqrt-d, max-dist or a number")
    p.add_argument("--matrix", help="read the matrix from a file instead of sampling")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rbfrank", description="Low-rank structure of RBF kernels.")
    parser.add_argument("--version", action="version", version=f"rbfrank {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factorize", help="build a separable plan")
    _common(p)
    p.add_argument("--profile", default="gaussian", choices=["gaussian", "cauchy"])
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--construction", default="cheb", choices=["cheb", "ft"])
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--D", type=float, default=1.0)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--mf", type=int, default=1)
    p.add_argument("--mt", type=int, default=9)
    p.add_argument("--no-enforce-ratio", action="store_true")
    p.add_argument("--dx", type=float)
    p.add_argument("--dy", type=float)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--vq", type=float)
    p.add_argument("--rho-sq", type=float)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--window-order", type=int, default=7)
    p.add_argument("--points")
    p.add_argument("--points-y")
    p.add_argument("--factor-format", default="csv", choices=["csv", "bin"])
    p.add_argument("--prune", type=float)
    p.set_defaults(func=cmd_factorize)

    p = sub.add_parser("bounds", help="tabulate error bounds")
    _common(p)
    p.add_argument("--profile", default="gaussian", choices=["gaussian", "cauchy"])
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--D", type=float, default=1.0)
    p.add_argument("--n-list", help="orders, e.g. 2,4,8 or 0:12")
    p.add_argument("--ft", help="Fourier-Taylor orders as MF:MT pairs, e.g. 1:9,2:18")
    p.add_argument("--rho-sq", type=float)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--vq", type=float)
    p.add_argument("--norm-f", type=float)
    p.add_argument("--dx", type=float, default=0.5)
    p.add_argument("--dy", type=float, default=0.5)
    p.add_argument("--delta", help="comma-separated delta values for the probabilistic columns")
    p.add_argument("--window-order", type=int, default=7)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("rank-sweep", help="numerical rank across dimensions")
    _common(p)
    _data(p)
    p.add_argument("--d-list", default="2,4,6")
    p.add_argument("--tol", default="1e-1,1e-2")
    p.add_argument("--norm", default="max")
    p.add_argument("--scenario", default="complete", choices=["complete", "partial", "none"])
    p.add_argument("--grid-search-p", action="store_true")
    p.set_defaults(func=cmd_rank_sweep)

    p = sub.add_parser("spectrum", help="singular values, ranks and ratio spikes")
    _common(p)
    _data(p)
    p.add_argument("--tol", default="1e-1,1e-2,1e-3")
    p.add_argument("--norm", default="fro,two,max")
    p.add_argument("--thresholds", default="4,2")
    p.add_argument("--k-max", type=int)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("reconstruct", help="reconstruction error vs rank")
    _common(p)
    _data(p)
    p.add_argument("--ranks", default="0:60")
    p.add_argument("--methods", default="svd")
    p.add_argument("--oversample", type=int, default=10)
    p.add_argument("--power-iters", type=int, default=2)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sample", help="write a point cloud")
    _common(p)
    p.add_argument("--scheme", default="endpoint", choices=["endpoint", "uniform", "halton"])
    p.add_argument("--N", type=int, default=DEFAULT_N)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--box", help="lo,hi applied to every axis")
    p.add_argument("--scenario", choices=["complete", "partial", "none"])
    p.set_defaults(func=cmd_sample)
    return parser


def parse(argv: Sequence[str]):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.from_metadata:
        stored = read_metadata(args.from_metadata)["config"]["argv"]
        replay = list(stored) + ["--out", args.out]
        args = parser.parse_args(replay)
        args._argv = list(stored)
    else:
        args._argv = _strip_out(list(argv))
    return args


def _strip_out(argv: list) -> list:
    out = []
    skip = False
    for i, a in enumerate(argv):
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        out.append(a)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse(argv)
        with _threads(args):
            result = args.func(args)
        if isinstance(result, dict):
            print(json.dumps(result, default=float))
        return 0
    except RBFRankError as exc:
        print(f"rbfrank: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
