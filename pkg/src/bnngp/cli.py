"""Command-line front end: desk-scale experiment drivers emitting CSV.

Every command takes --seed and is byte-reproducible across runs and thread
counts (--threads only schedules work, it never changes results, and is
therefore not echoed into output headers).  Output tables are long-format
CSV with a '#'-prefixed block of the resolved configuration; the rings-gen
dataset is written without comments so the file is exactly header + rows.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 IO failure.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import correlations, data, optimize, sampling
from .errors import NumericalError, UsageError
from .params import NORMALIZED_RELU, Architecture, Hyperparams


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _add_common(p, seed=0):
    p.add_argument("--seed", type=int, default=seed, help="RNG seed")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads (never affects results)")
    p.add_argument("--out", required=True, help="output CSV path")


def _config_items(args, skip=("out", "threads", "func")):
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def cmd_rings_gen(args) -> int:
    d = data.generate_rings()
    data.save_csv(args.out, d)
    return 0


def cmd_mll_sweep(args) -> int:
    d = data.standardize(data.load_csv(args.data))
    init = Hyperparams(v_b=args.init_vb, v_w=args.init_vw, v_n=args.init_vn)
    cells = optimize.mll_sweep(
        d.X, d.Y, args.d1, _int_list(args.widths), _int_list(args.depths),
        NORMALIZED_RELU, init, n_mc=args.n_mc, seed=args.seed,
        max_iters=args.max_iters, n_mc_final=args.n_mc_final, lr0=args.lr0,
        threads=args.threads,
    )
    rows = [{
        "width": "inf" if c.width is None else c.width,
        "post_depth": c.post_hidden,
        "mll_per_point": c.mll_per_point,
        "v_b": c.params.v_b if c.params else None,
        "v_w": c.params.v_w if c.params else None,
        "v_n": c.params.v_n if c.params else None,
        "error": c.error,
    } for c in cells]
    data.write_table(
        args.out,
        ["width", "post_depth", "mll_per_point", "v_b", "v_w", "v_n", "error"],
        rows, config=_config_items(args),
    )
    if all(c.error is not None for c in cells):
        raise NumericalError("every sweep cell failed")
    return 0


def cmd_quadcorr(args) -> int:
    h = Hyperparams(v_b=args.vb, v_w=args.vw, v_n=args.vn)
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    widths = _int_list(args.h_list)
    geom = correlations.BottleneckGeometry.from_inputs(
        X[0], X[1], h, pre_depth=1, include_noise=True
    )
    rows = []
    for width in widths:
        row = {"width": width, "depth": args.d}
        if args.mode in ("theory", "compare"):
            row["theory"] = correlations.quad_corr_between(geom, h, args.d, width)
        if args.mode in ("sim", "compare"):
            arch = Architecture.single_bottleneck(
                input_dim=2, output_dim=2, pre_depth=1, width=width,
                post_hidden=args.d - 1, nonlinearity=NORMALIZED_RELU,
                bottleneck_noise=True,
            )
            runs = sampling.quad_corr_runs(
                arch, h, X, args.n_samples, args.n_runs,
                seed=sampling.derive_seed(args.seed, width),
                threads=args.threads,
            )
            row.update(sim_mean=runs.mean, sim_std=runs.std,
                       sim_std_error=runs.std_error)
        rows.append(row)
    fields = ["width", "depth"]
    if args.mode in ("theory", "compare"):
        fields.append("theory")
    if args.mode in ("sim", "compare"):
        fields += ["sim_mean", "sim_std", "sim_std_error"]
    data.write_table(args.out, fields, rows, config=_config_items(args))
    return 0


def cmd_phase(args) -> int:
    rows = []
    for alpha_pi in _float_list(args.alpha_list):
        alpha = alpha_pi * math.pi
        for vw in _float_list(args.vw_grid):
            h = Hyperparams(v_b=args.vb, v_w=vw, v_n=0.0)
            row = {"alpha_over_pi": alpha_pi, "v_w": vw}
            if args.quantity == "depth-scale":
                row["value"] = correlations.depth_scale(h)
            else:
                geom = correlations.BottleneckGeometry.from_input_angle(alpha, h)
                if args.quantity == "qx-inf":
                    row["value"] = correlations.quad_corr_between_inf(
                        geom, h, args.H
                    )
                else:
                    row["value"] = correlations.quad_corr_single_inf(
                        geom, h, args.H
                    )
            rows.append(row)
    data.write_table(args.out, ["alpha_over_pi", "v_w", "value"], rows,
                     config=_config_items(args))
    return 0


def cmd_multi_bottleneck(args) -> int:
    h = Hyperparams(v_b=args.vb, v_w=args.vw, v_n=args.vn)
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    rows = sampling.multi_bottleneck_experiment(
        _int_list(args.widths), _int_list(args.n_bottlenecks_list), h, X,
        args.n_samples, args.n_runs, args.seed, total_hidden=args.total_hidden,
        threads=args.threads,
    )
    data.write_table(
        args.out,
        ["width", "n_bottlenecks", "qx_mean", "qx_std", "qx_std_error"],
        rows, config=_config_items(args),
    )
    return 0


def cmd_correspondence(args) -> int:
    d = data.standardize(data.load_csv(args.data))
    h = Hyperparams(v_b=args.vb, v_w=args.vw, v_n=args.vn)
    result = sampling.wide_correspondence_check(
        args.d1, args.d2, _int_list(args.width_ladder), h, d.X, d.Y,
        args.n_mc, args.seed, threads=args.threads,
    )
    config = _config_items(args)
    config["mll_infinite"] = repr(result["mll_infinite"])
    data.write_table(
        args.out,
        ["width", "mll", "mll_std_error", "mll_gap", "zh_frobenius_error"],
        result["rows"], config=config,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bnngp",
        description="Bottleneck NNGP experiments (CSV output)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rings-gen", help="write the Rings dataset")
    _add_common(p)
    p.set_defaults(func=cmd_rings_gen)

    p = sub.add_parser("mll-sweep",
                       help="optimized MLL over a width x depth grid")
    p.add_argument("--data", required=True, help="dataset CSV (x_*/y_* columns)")
    p.add_argument("--d1", type=int, default=1, help="pre-bottleneck hidden layers")
    p.add_argument("--widths", default="2,8,64,1024", help="bottleneck widths")
    p.add_argument("--depths", default="1,3,7", help="post-bottleneck hidden layers")
    p.add_argument("--n-mc", type=int, default=100, dest="n_mc")
    p.add_argument("--n-mc-final", type=int, default=1000, dest="n_mc_final")
    p.add_argument("--max-iters", type=int, default=500, dest="max_iters")
    p.add_argument("--lr0", type=float, default=0.1)
    p.add_argument("--init-vb", type=float, default=1.0, dest="init_vb")
    p.add_argument("--init-vw", type=float, default=1.0, dest="init_vw")
    p.add_argument("--init-vn", type=float, default=0.1, dest="init_vn")
    _add_common(p)
    p.set_defaults(func=cmd_mll_sweep)

    p = sub.add_parser("quadcorr",
                       help="quadratic correlation: theory vs simulation")
    p.add_argument("--mode", choices=("theory", "sim", "compare"),
                   default="compare")
    p.add_argument("--h-list", default="1,2,3,4,5,6,7,8,9,10", dest="h_list")
    p.add_argument("--d", type=int, default=2, help="post-bottleneck depth")
    p.add_argument("--vb", type=float, default=1.0)
    p.add_argument("--vw", type=float, default=1.0)
    p.add_argument("--vn", type=float, default=1e-4)
    p.add_argument("--n-samples", type=int, default=10**6, dest="n_samples")
    p.add_argument("--n-runs", type=int, default=10, dest="n_runs")
    _add_common(p)
    p.set_defaults(func=cmd_quadcorr)

    p = sub.add_parser("phase", help="infinite-depth phase diagnostics")
    p.add_argument("--quantity", choices=("qx-inf", "q-inf", "depth-scale"),
                   required=True)
    p.add_argument("--vw-grid", default="0.5,0.8,0.9,0.95,1.0,1.05,1.1,1.3,1.5",
                   dest="vw_grid")
    p.add_argument("--alpha-list", default="0.25,0.5,0.75", dest="alpha_list",
                   help="input angles as multiples of pi")
    p.add_argument("--vb", type=float, default=0.09)
    p.add_argument("--H", type=int, default=2)
    _add_common(p)
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("multi-bottleneck",
                       help="quadratic correlation vs bottleneck count")
    p.add_argument("--widths", default="1,2,4,8,16,32")
    p.add_argument("--n-bottlenecks-list", default="0,1,2,3",
                   dest="n_bottlenecks_list")
    p.add_argument("--total-hidden", type=int, default=11, dest="total_hidden")
    p.add_argument("--vb", type=float, default=1.0)
    p.add_argument("--vw", type=float, default=1.0)
    p.add_argument("--vn", type=float, default=1e-4)
    p.add_argument("--n-samples", type=int, default=10**6, dest="n_samples")
    p.add_argument("--n-runs", type=int, default=10, dest="n_runs")
    _add_common(p)
    p.set_defaults(func=cmd_multi_bottleneck)

    p = sub.add_parser("correspondence",
                       help="wide-bottleneck convergence diagnostics")
    p.add_argument("--data", required=True)
    p.add_argument("--d1", type=int, default=1)
    p.add_argument("--d2", type=int, default=1)
    p.add_argument("--width-ladder", default="4,16,64,256,1024",
                   dest="width_ladder")
    p.add_argument("--n-mc", type=int, default=200, dest="n_mc")
    p.add_argument("--vb", type=float, default=1.0)
    p.add_argument("--vw", type=float, default=1.0)
    p.add_argument("--vn", type=float, default=0.1)
    _add_common(p)
    p.set_defaults(func=cmd_correspondence)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
