"""Command-line front end.

Every command writes a JSON report, its CSV/BFGRID/PGM data and PNG
figures into ``--out``, together with ``config.resolved``, the merged
configuration that reproduces the run.  Outputs are staged in a scratch
directory and only moved into place when the command finishes, so a
failed run leaves nothing behind.

Exit codes: 0 pass, 2 experiment ran but failed its criterion, 1 usage or
I/O error.
"""

from __future__ import annotations

import argparse
import logging
import re
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from bifcurrent import io
from bifcurrent.parallel import resolve_threads

log = logging.getLogger("bifcurrent")

EXIT_PASS, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


def parse_complex(text: str) -> complex:
    """Accept ``-2``, ``0.3+0.1j``, ``i``, ``1-2i`` and similar."""
    s = str(text).strip().replace(" ", "").replace("i", "j")
    s = re.sub(r"(^|[+-])j", r"\g<1>1j", s)
    try:
        return complex(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def parse_int_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def parse_complex_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [parse_complex(v) if isinstance(v, str) else complex(*v) if isinstance(
            v, (list, tuple)) else complex(v) for v in text]
    return [parse_complex(v) for v in str(text).split(",") if v.strip()]


def parse_rect(text) -> tuple:
    vals = [float(v) for v in text] if isinstance(text, (list, tuple)) else [
        float(v) for v in str(text).split(",")]
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("rect needs re_min,re_max,im_min,im_max")
    return tuple(vals)


class Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 and print the full flag schema."""

    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"\n{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--config", help="JSON file with option values; flags override it")
    g.add_argument("--out", help="output directory (default: out/<command>)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--threads", type=int, default=0, help="worker threads, 0 = auto")
    g.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    g.add_argument("--timing", action="store_true",
                   help="record wall time in the report (breaks byte-identity)")
    g.add_argument("-v", "--verbose", action="store_true")


def _line_args(p):
    p.add_argument("--alpha", type=parse_complex, default=complex(1 / 20))
    p.add_argument("--beta", type=parse_complex, default=complex(1.0))


def _grid_args(p, rect, nx):
    p.add_argument("--rect", type=parse_rect, default=rect)
    p.add_argument("--nx", type=int, default=nx)
    p.add_argument("--ny", type=int, default=None, help="defaults to --nx")
    p.add_argument("--n-cap", type=int, default=4096)


def build_parser() -> Parser:
    parser = Parser(prog="bifcurrent",
                    description="Green functions, tangency measures and their limits "
                                "for the quadratic family.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=Parser)
    sub.required = True

    p = sub.add_parser("green", help="dump a Green-function field")
    p.add_argument("--c", type=parse_complex, default=None,
                   help="dynamical plane of p_c; omit for the parameter field g_c(0)")
    _grid_args(p, (-2.5, 1.5, -1.5, 1.5), 512)
    p.add_argument("--tol", type=float, default=1e-12)

    p = sub.add_parser("mandel-grid", help="membership codes and parameter Green render")
    _grid_args(p, (-2.5, 1.5, -1.5, 1.5), 512)

    p = sub.add_parser("tangency", help="vertical-tangency cloud and count table")
    p.add_argument("--n", type=int, default=10)
    _line_args(p)
    p.add_argument("--random-lines", type=int, default=0,
                   help="also tabulate this many seeded admissible lines")

    p = sub.add_parser("mu-n", help="tangency measure, its c-marginal and potentials")
    p.add_argument("--n", type=int, default=8)
    _line_args(p)
    _grid_args(p, (-2.5, 1.5, -1.5, 1.5), 256)
    p.add_argument("--probes", type=int, default=100)

    p = sub.add_parser("slice", help="slices of the tangency measure against mu_c")
    p.add_argument("--n-list", type=parse_int_list, default=[6, 8, 10, 12])
    p.add_argument("--c0", type=parse_complex, default=1j)
    p.add_argument("--width", type=float, default=0.05)
    p.add_argument("--brolin-count", type=int, default=2 ** 16)
    _line_args(p)

    p = sub.add_parser("convergence", help="2^-n ln|b Q_n - a| against g_c(0)")
    p.add_argument("--a", type=parse_complex_list, default=[0j],
                   help="ascending coefficients of a, comma separated")
    p.add_argument("--b", type=parse_complex_list, default=[1 + 0j])
    p.add_argument("--n-list", type=parse_int_list, default=[4, 6, 8, 10, 12])
    _grid_args(p, (-2.5, 1.5, -1.5, 1.5), 256)

    p = sub.add_parser("verify", help="run the invariant suite")

    p = sub.add_parser("render", help="BFGRID file to PGM (and PNG)")
    p.add_argument("input", help="BFGRID01 file")
    p.add_argument("--gamma", type=float, default=0.5)

    for name, sp in sub.choices.items():
        _common(sp)
    return parser


def _resolve(parser: Parser, argv) -> argparse.Namespace:
    """Parse argv; values from ``--config`` fill in whatever flags left unset."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = io.load_json(args.config)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions if a.dest != "help"}
    cfg.pop("command", None)
    unknown = sorted(set(k.replace("-", "_") for k in cfg) - set(known))
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    defaults = {}
    for key, value in cfg.items():
        action = known[key.replace("-", "_")]
        try:
            defaults[action.dest] = _coerce(action, value)
        except (argparse.ArgumentTypeError, ValueError, TypeError) as exc:
            raise UsageError(f"config key {key}: {exc}") from exc
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _coerce(action, value):
    # JSON stores complex numbers as [re, im]
    if value is None or isinstance(value, bool) or action.type is None:
        return value
    if action.type is parse_complex and isinstance(value, (list, tuple)):
        return complex(*value)
    if action.type is parse_complex and isinstance(value, (int, float)):
        return complex(value)
    return action.type(value)


def _config_dict(args) -> dict:
    skip = {"config", "verbose", "timing", "no_figures", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# -- commands -----------------------------------------------------------------


def _grid_spec(args):
    from bifcurrent.measures import GridSpec
    return GridSpec(args.rect, args.nx, args.ny or args.nx)


def _line(args):
    from bifcurrent.roots import LineParams
    return LineParams(args.alpha, args.beta)


def _write_report(out: Path, rep, args) -> None:
    rep.seed = args.seed if rep.seed is None else rep.seed
    (out / "report.json").write_text(rep.to_json(include_runtime=args.timing))
    for name, text in rep.tables.items():
        (out / f"{name}.csv").write_text(text)


def cmd_green(args, out: Path, threads: int):
    from bifcurrent.dynamics import green_array
    from bifcurrent.experiments import ExperimentReport
    from bifcurrent.measures import GridField
    spec = _grid_spec(args)
    pts = spec.points()
    if args.c is None:
        g, err, n_used = green_array(pts, np.zeros_like(pts), args.tol, args.n_cap)
        title = "g_c(0) over the parameter plane"
    else:
        g, err, n_used = green_array(args.c, pts, args.tol, args.n_cap)
        title = f"g_c(z), c = {args.c}"
    field = GridField(spec, g)
    io.write_grid(out / "green.bfgrid", field)
    io.write_pgm(out / "green.pgm", g)
    rep = ExperimentReport("green", {"c": args.c, "rect": list(spec.rect), "nx": spec.nx,
                                     "ny": spec.ny, "tol": args.tol, "n_cap": args.n_cap},
                           metrics={"max_g": float(g.max()), "max_error_bound": float(err.max()),
                                    "escaped_fraction": float((g > 0).mean())},
                           passed=None)
    if not args.no_figures:
        from bifcurrent.plotting import plot_field
        plot_field(g, spec, out / "green.png", title, label="g")
    return rep


def cmd_mandel_grid(args, out: Path, threads: int):
    from bifcurrent.dynamics import green_param_array, membership_array
    from bifcurrent.experiments import ExperimentReport
    from bifcurrent.measures import GridField
    spec = _grid_spec(args)
    pts = spec.points()
    state, _ = membership_array(pts, np.zeros_like(pts), args.n_cap)
    g = green_param_array(pts, n_cap=args.n_cap)
    io.write_grid(out / "membership.bfgrid", GridField(spec, state.astype(np.float64)))
    io.write_grid(out / "green_param.bfgrid", GridField(spec, g))
    io.write_pgm(out / "green_param.pgm", g)
    cell = spec.dx * spec.dy
    rep = ExperimentReport(
        "mandel-grid", {"rect": list(spec.rect), "nx": spec.nx, "ny": spec.ny,
                        "n_cap": args.n_cap},
        metrics={"inside": int((state == 0).sum()), "outside": int((state == 1).sum()),
                 "undetermined": int((state == 2).sum()),
                 "area_inside_estimate": float((state == 0).sum() * cell)},
        passed=None)
    if not args.no_figures:
        from bifcurrent.plotting import plot_field
        plot_field(g, spec, out / "green_param.png", "g_c(0)", log_scale=True,
                   label="log10(1 + g)")
        plot_field(state, spec, out / "membership.png", "0 inside, 1 outside, 2 undetermined")
    return rep


def cmd_tangency(args, out: Path, threads: int):
    from bifcurrent.experiments import tangency_count_table
    from bifcurrent.roots import LineParams
    if not 1 <= args.n <= 20:
        raise UsageError("--n must be in [1, 20]")
    line = _line(args)
    rep = tangency_count_table(args.n, line, threads)
    rng = np.random.default_rng(args.seed)
    extra = [LineParams.random_admissible(rng) for _ in range(args.random_lines)]
    ok = bool(rep.passed)
    for i, other in enumerate(extra):
        r = tangency_count_table(args.n, other, threads)
        rep.tables[f"counts_line{i + 1}"] = r.tables["counts"]
        rep.parameters[f"line{i + 1}"] = {"alpha": other.alpha, "beta": other.beta}
        ok &= bool(r.passed)
    rep.passed = ok
    cloud = rep.artifacts["clouds"][args.n]
    io.write_cloud_csv(out / f"tangency_n{args.n}.csv", cloud)
    last = rep.tables["counts"].strip().splitlines()[-1].split(",")
    print(",".join(last[:2] + [last[3]]))
    if not args.no_figures:
        from bifcurrent.plotting import plot_cloud
        plot_cloud(cloud, out / f"tangency_n{args.n}_c.png",
                   f"tangency atoms n={args.n}, c-coordinates")
        plot_cloud(cloud, out / f"tangency_n{args.n}_z.png",
                   f"tangency atoms n={args.n}, z-coordinates", column="z")
    return rep


def cmd_mu_n(args, out: Path, threads: int):
    from bifcurrent.experiments import (ExperimentReport, green_param_field,
                                        linear_factor_offset, potential_identity,
                                        tangency_potential)
    from bifcurrent.measures import GridField, marginal_c, potential_l1_distance
    line = _line(args)
    spec = _grid_spec(args)
    res, literal, cloud = potential_identity(args.n, line, args.probes, args.seed, spec.rect)
    marg = marginal_c(cloud)
    u = GridField(spec, np.maximum(tangency_potential(spec.points(), args.n, line), -745.0))
    target = GridField(spec, 2.0 * green_param_field(spec, args.n_cap).values)
    io.write_cloud_csv(out / "mu_tilde.csv", cloud)
    io.write_cloud_csv(out / "mu_marginal.csv", marg)
    io.write_grid(out / "potential.bfgrid", u)
    expected = args.n * 2 ** (args.n - 1)
    ok = cloud.certified and len(cloud) == expected and abs(cloud.total_mass - 1) <= 1e-12 \
        and res < 1e-8
    rep = ExperimentReport(
        "mu-n", {"n": args.n, "alpha": line.alpha, "beta": line.beta, "rect": list(spec.rect),
                 "nx": spec.nx, "ny": spec.ny, "probes": args.probes, "n_cap": args.n_cap},
        metrics={"atoms": len(cloud), "expected_atoms": expected, "mass": cloud.total_mass,
                 "certified": cloud.certified, "marginal_atoms": len(marg),
                 "identity_residual": res, "uncorrected_identity_residual": literal,
                 "linear_factor_offset": linear_factor_offset(args.n, line),
                 "l1_to_2g": potential_l1_distance(u, target)},
        passed=bool(ok))
    print(f"atoms={len(cloud)} mass={cloud.total_mass!r}")
    if not args.no_figures:
        from bifcurrent.plotting import plot_cloud, plot_field
        plot_cloud(marg, out / "mu_marginal.png", f"c-marginal, n={args.n}")
        plot_field(u.values, spec, out / "potential.png", f"U_n, n={args.n}")
    return rep


def cmd_slice(args, out: Path, threads: int):
    from bifcurrent.experiments import slice_vs_equilibrium
    line = _line(args)
    rep = slice_vs_equilibrium(args.n_list, args.c0, args.width, args.brolin_count,
                               args.seed, line, threads=threads)
    for n, sl in rep.artifacts["slices"].items():
        io.write_cloud_csv(out / f"slice_n{n}.csv", sl)
    if not args.no_figures and rep.artifacts["slices"]:
        from bifcurrent.plotting import plot_cloud
        n = max(rep.artifacts["slices"])
        plot_cloud(rep.artifacts["slices"][n], out / f"slice_n{n}.png",
                   f"slice at c0={args.c0}, n={n}")
        plot_cloud(rep.artifacts["brolin"], out / "brolin.png", f"backward orbit, c={args.c0}")
    return rep


def cmd_convergence(args, out: Path, threads: int):
    from bifcurrent.experiments import mandel_green_convergence
    spec = _grid_spec(args)
    rep = mandel_green_convergence(args.a, args.b, args.n_list, spec, args.n_cap)
    io.write_grid(out / "green_param.bfgrid", rep.artifacts["green_param"])
    if not args.no_figures:
        from bifcurrent.plotting import plot_trend
        n_list, dists = rep.artifacts["distances"]
        plot_trend(n_list, {"L1 distance": dists}, out / "convergence.png",
                   "distance to g_c(0)", "mean |phi_n - g|")
    return rep


def cmd_verify(args, out: Path, threads: int):
    from bifcurrent.checks import run_suite, suite_report
    results, art = run_suite(args.seed, threads)
    rep = suite_report(results, args.seed)
    io.write_grid(out / "m_measure.bfgrid", art["m_measure"])
    io.write_pgm(out / "m_measure.pgm", art["m_measure"].cell_mass)
    io.write_cloud_csv(out / "tangency_n6.csv", art["tangency_cloud"])
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}")
    if not args.no_figures:
        from bifcurrent.plotting import plot_field
        mm = art["m_measure"]
        plot_field(mm.cell_mass, mm.spec, out / "m_measure.png", "grid bifurcation measure",
                   log_scale=True)
    return rep


def cmd_render(args, out: Path, threads: int):
    from bifcurrent.experiments import ExperimentReport
    try:
        grid = io.read_grid(args.input)
    except (OSError, io.FormatError) as exc:
        raise UsageError(str(exc)) from exc
    values = getattr(grid, "cell_mass", None)
    values = grid.values if values is None else values
    stem = Path(args.input).stem
    io.write_pgm(out / f"{stem}.pgm", values, args.gamma)
    if not args.no_figures:
        from bifcurrent.plotting import plot_field
        plot_field(values, grid.spec, out / f"{stem}.png", stem)
    return ExperimentReport("render", {"input": str(args.input), "gamma": args.gamma,
                                       "nx": grid.spec.nx, "ny": grid.spec.ny})


COMMANDS = {"green": cmd_green, "mandel-grid": cmd_mandel_grid, "tangency": cmd_tangency,
            "mu-n": cmd_mu_n, "slice": cmd_slice, "convergence": cmd_convergence,
            "verify": cmd_verify, "render": cmd_render}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _resolve(parser, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"bifcurrent: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out or Path("out") / args.command)
    try:
        threads = resolve_threads(args.threads or None)
        out.parent.mkdir(parents=True, exist_ok=True)
        stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    except (OSError, ValueError) as exc:
        print(f"bifcurrent: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    try:
        rep = COMMANDS[args.command](args, stage, threads)
        if args.timing:
            rep.runtime = time.perf_counter() - t0
        _write_report(stage, rep, args)
        io.dump_json(stage / "config.resolved", {"command": args.command, **_config_dict(args)})
        if out.exists():
            shutil.rmtree(out)
        stage.rename(out)
    except UsageError as exc:
        shutil.rmtree(stage, ignore_errors=True)
        print(f"bifcurrent: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, ArithmeticError) as exc:
        shutil.rmtree(stage, ignore_errors=True)
        print(f"bifcurrent: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    verdict = {True: "pass", False: "FAIL", None: "done"}[rep.passed]
    print(f"{args.command}: {verdict} -> {out}")
    return EXIT_FAIL if rep.passed is False else EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
