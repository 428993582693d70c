"""Command-line front end.

Subcommands: construct, defect, propagate, cwt, kernel, sweep, report.
Long-form flags only.  ``QML_THREADS`` caps the artifact's own parallelism
(the reference implementation computes serially, so results are identical
for every setting; the variable is honored for interface stability).

Exit codes: 0 success / all assertions pass, 1 configuration or runtime
error, 2 assertion failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from importlib import resources

import numpy as np

from . import estimates, quasimodes, reporting, symbols, wavelets
from .config import ConfigError, parse_config, parse_graph_expr, parse_symbol_expr, run
from .grid import GridSpec, export_modulus_csv, lp_norm, read_field, write_field
from .propagator import analytic_phase_table, apply_w, quasimode_pushforward

__all__ = ["main", "shipped_config_names", "load_shipped_config"]


def shipped_config_names() -> list[str]:
    pkg = resources.files("qmlab") / "configs"
    return sorted(p.name[:-4] for p in pkg.iterdir() if p.name.endswith(".cfg"))


def load_shipped_config(name: str) -> str:
    path = resources.files("qmlab") / "configs" / f"{name}.cfg"
    if not path.is_file():
        raise FileNotFoundError(
            f"no shipped config {name!r}; have {shipped_config_names()}")
    return path.read_text()


def _read_config_arg(arg: str) -> str:
    if os.path.exists(arg):
        with open(arg) as fh:
            return fh.read()
    return load_shipped_config(arg)


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("QML_THREADS", "1")))
    except ValueError:
        return 1


def _cmd_construct(args) -> int:
    grid = quasimodes.grid_for_t_alpha(args.h, half_width=args.grid_l,
                                       coverage=args.coverage, n_max=args.n_max)
    spec = quasimodes.TAlphaSpec(h=args.h, alpha=args.alpha,
                                 normalization=args.normalization,
                                 smoothed_edges=args.smoothed_edges)
    fld = quasimodes.build_t_alpha(spec, grid)
    write_field(fld, args.out)
    print(f"wrote {args.out}: N={grid.points_per_axis} L={grid.half_width} "
          f"h={args.h} alpha={args.alpha} l2={fld.l2_norm():.6f}")
    return 0


def _cmd_defect(args) -> int:
    fld = read_field(args.infile)
    p1 = parse_symbol_expr(args.symbol)
    rows = []
    pairs = [(args.m1, args.m2)]
    for m1, m2 in pairs:
        if args.symbol2:
            rep = quasimodes.joint_defect(p1, parse_symbol_expr(args.symbol2), fld, m1, m2)
        else:
            rep = quasimodes.defect(p1, fld, max(m1, 1))
        rows.append((fld.grid.h, args.alpha, rep))
    text = reporting.defect_csv(rows)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_propagate(args) -> int:
    fld = read_field(args.infile)
    graph = parse_graph_expr(args.a)
    table = analytic_phase_table(graph, fld.grid)
    if args.x1 is not None:
        vals = np.stack([apply_w(table, row, args.x1, fld.grid)
                         for row in fld.values])
        out = type(fld)(fld.grid, vals)
    else:
        # indicator-built quasimodes carry polynomial tails; the CLI gate only
        # rejects genuinely delocalized inputs (plane waves etc.)
        out = quasimode_pushforward(table, fld, localization_tol=0.5)
    write_field(out, args.out)
    print(f"wrote {args.out}: l2={out.l2_norm():.6f}")
    return 0


def _cmd_cwt(args) -> int:
    fld = read_field(args.infile)
    h = fld.grid.h
    w = wavelets.default_wavelet()
    part = wavelets.make_partition(h, args.k)
    a_grid = wavelets.default_scale_grid(h ** args.a_min_pow, args.a_max,
                                         per_decade=args.per_decade)
    tab = wavelets.coefficient_norm_table(fld, w, a_grid, part)
    lines = ["a,b,j,norm"]
    for i, a in enumerate(tab["a"]):
        for j in range(part.J + 1):
            lines.append(f"{a!r},,{j},{tab['bands'][i, j]!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_kernel(args) -> int:
    part = wavelets.make_partition(args.h, args.k)
    grid = GridSpec(4.0, 64, args.h)
    table = analytic_phase_table(parse_graph_expr(args.graph), grid)
    w = wavelets.default_wavelet()
    a = args.h ** float(args.a[2:]) if args.a.startswith("h^") else float(args.a)
    s = estimates.kernel_sample(table, w, part, args.j, a, args.t)
    print("j,a,t,regime,sup_abs")
    print(f"{s.j},{s.a!r},{s.t!r},{s.regime},{s.sup_abs!r}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = parse_config(_read_config_arg(args.config))
    report = run(cfg)
    out_dir = args.out or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, cfg.name + ".csv")
    with open(csv_path, "w", newline="") as fh:
        fh.write(reporting.measurements_csv(report))
    print(f"wrote {csv_path}")
    return 0


def _cmd_report(args) -> int:
    cfg = parse_config(_read_config_arg(args.config))
    report = run(cfg)
    out_dir = args.out or cfg.out_dir
    csv_path, md_path = reporting.write_report(report, out_dir)
    print(f"wrote {csv_path} and {md_path}")
    for a in report.assertions:
        print(f"  [{'PASS' if a.passed else 'FAIL'}] {a.name}: measured={a.measured:.6g}"
              + (f" expected={a.expected:.6g}" if a.expected is not None else "")
              + (f" tol={a.tol:.3g}" if a.tol is not None else ""))
    return 0 if report.passed else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qml", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 allow_abbrev=False)
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", help="build the polar-rectangle quasimode")
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--h", type=float, required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--grid-l", type=float, default=5.0)
    c.add_argument("--coverage", type=float, default=1.25)
    c.add_argument("--n-max", type=int, default=2048)
    c.add_argument("--normalization", choices=["unit_l2", "analytic_prefactor"],
                   default="unit_l2")
    c.add_argument("--smoothed-edges", action="store_true")
    c.set_defaults(fn=_cmd_construct)

    d = sub.add_parser("defect", help="measure quasimode defects")
    d.add_argument("--in", dest="infile", required=True)
    d.add_argument("--symbol", required=True)
    d.add_argument("--symbol2", default=None)
    d.add_argument("--m1", type=int, default=1)
    d.add_argument("--m2", type=int, default=0)
    d.add_argument("--alpha", type=float, default=None)
    d.add_argument("--out", default=None)
    d.set_defaults(fn=_cmd_defect)

    pr = sub.add_parser("propagate", help="apply the straightening propagator")
    pr.add_argument("--a", required=True, help="generator graph, e.g. circle")
    pr.add_argument("--x1", type=float, default=None,
                    help="fixed slice time; omitted = row-wise pushforward")
    pr.add_argument("--in", dest="infile", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(fn=_cmd_propagate)

    cw = sub.add_parser("cwt", help="coefficient norm table of a field")
    cw.add_argument("--in", dest="infile", required=True)
    cw.add_argument("--k", type=int, required=True)
    cw.add_argument("--a-min-pow", type=float, default=0.6)
    cw.add_argument("--a-max", type=float, default=4.0)
    cw.add_argument("--per-decade", type=int, default=24)
    cw.add_argument("--out", default=None)
    cw.set_defaults(fn=_cmd_cwt)

    kn = sub.add_parser("kernel", help="one kernel envelope sample")
    kn.add_argument("--h", type=float, required=True)
    kn.add_argument("--k", type=int, default=1)
    kn.add_argument("--j", type=int, required=True)
    kn.add_argument("--a", required=True, help="scale, number or h^pow")
    kn.add_argument("--t", type=float, required=True)
    kn.add_argument("--graph", default="parabola")
    kn.set_defaults(fn=_cmd_kernel)

    sw = sub.add_parser("sweep", help="run a config's pipeline, write CSV")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", default=None)
    sw.set_defaults(fn=_cmd_sweep)

    rp = sub.add_parser("report", help="sweep + assertions + markdown report")
    rp.add_argument("--config", required=True)
    rp.add_argument("--out", default=None)
    rp.set_defaults(fn=_cmd_report)

    return ap


def main(argv=None) -> int:
    _thread_cap()  # read once; serial implementation is thread-count independent
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
