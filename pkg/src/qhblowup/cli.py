"""Command-line front end.

Usage:
    qhblowup decompose PROBLEM
    qhblowup balance PROBLEM [--seeds "1.5,1; 4,8"]
    qhblowup horizon PROBLEM
    qhblowup correspond PROBLEM [--json out.json]
    qhblowup integrate PROBLEM --y0 1 --tau-end 50 [--csv traj.csv]
    qhblowup check-expansion PROBLEM EXPANSION

PROBLEM is a path to a problem file or the name of a bundled one (kk,
scalar_cubic, two_phase, andrews1, andrews2, log, log2, scalar_square,
scalar_cube). Exit codes: 0 success, 1 usage or parse error, 2 nothing found,
3 an invariant check failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import mpmath
import numpy as np

from . import report
from .blowup import (
    DEFAULT_SOLVE_TOL,
    build_correspondence,
    default_balance_seeds,
    default_horizon_seeds,
    equilibrium_failures,
    existence_verdict,
    find_horizon_equilibria,
    pair_up,
    solve_balance,
)
from .compactify import build_desingularized, compactify_point
from .dynamics import (
    ExpansionTerm,
    estimate_tmax,
    expansion_residual_order,
    integrate,
    monitor_lemma_G,
)
from .errors import BlowupError, ProblemParseError
from .field import decompose, verify_qh_identity
from .problem import builtin_problem_dir, load_problem, parse_expansion, real_expr
from .spectral import DEFAULT_RANK_TOL

EXIT_OK, EXIT_USAGE, EXIT_EMPTY, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _resolve(path):
    p = Path(path)
    if p.exists():
        return p
    builtin = builtin_problem_dir() / f"{path}.toml"
    if builtin.exists():
        return builtin
    raise UsageError(f"no such problem file: {path}")


def _parse_points(text, n):
    pts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            p = [float(v) for v in chunk.split(",")]
        except ValueError:
            raise UsageError(f"cannot parse point {chunk!r}") from None
        if len(p) != n:
            raise UsageError(f"point {chunk!r} has {len(p)} coordinates, expected {n}")
        pts.append(np.array(p))
    return pts


def _fmt(x):
    if isinstance(x, (complex, np.complexfloating)):
        if x.imag == 0:
            return f"{x.real:.15g}"
        return f"{x.real:.15g}{x.imag:+.15g}j"
    return f"{x:.15g}"


def _vec(v):
    return "(" + ", ".join(_fmt(x) for x in np.asarray(v)) + ")"


class Context:
    def __init__(self, args):
        self.args = args
        self.path = _resolve(args.problem)
        self.spec = load_problem(self.path)
        tol = self.spec.tolerances
        self.rank_tol = args.rank_tol if args.rank_tol is not None else tol.get("rank_tol", DEFAULT_RANK_TOL)
        self.solve_tol = args.solve_tol if args.solve_tol is not None else tol.get("solve_tol", DEFAULT_SOLVE_TOL)
        self.rtol = args.rtol if args.rtol is not None else tol.get("rtol", 1e-10)
        self.atol = args.atol if args.atol is not None else tol.get("atol", 1e-12)
        self.field = self.spec.to_field()
        self.decomp = decompose(self.field)
        self._sys = None

    @property
    def sys(self):
        if self._sys is None:
            self._sys = build_desingularized(self.decomp)
        return self._sys

    @property
    def name(self):
        return self.spec.name or self.path.stem

    def seeds(self, kind):
        n = self.field.n
        explicit = []
        if self.args.seeds:
            explicit = _parse_points(self.args.seeds, n)
        else:
            explicit = [np.array(p) for p in self.spec.seeds.get(kind, [])]
        if self.args.no_default_seeds:
            return explicit
        if kind == "balance":
            return explicit + default_balance_seeds(self.field.alpha)
        return explicit + default_horizon_seeds(self.sys.compact)


def _emit(ctx, command, body, lines):
    text = report.dumps(report.envelope(command, ctx.name, body)) if ctx.args.json else None
    if ctx.args.json == "-":
        sys.stdout.write(text)
        return
    print("\n".join(lines))
    if text is not None:
        Path(ctx.args.json).write_text(text)


def cmd_decompose(ctx):
    ident = verify_qh_identity(ctx.decomp, ctx.args.samples, seed=0)
    sys_ = ctx.sys
    names = ctx.field.names
    lines = [f"problem: {ctx.name}", f"alpha = {list(ctx.field.alpha)}, k = {ctx.field.k}"]
    for i, nm in enumerate(names):
        lines.append(f"  {nm}: qh = {ctx.decomp.qh_part.components[i].to_str(names)}")
        lines.append(f"  {nm}: res = {ctx.decomp.residual_part.components[i].to_str(names)}")
    lines.append(f"Euler identity residual: {[_fmt(v) for v in ident.max_residual]}")
    lines.append(f"beta = {list(sys_.compact.beta)}, c = {sys_.compact.c}, assumption: {sys_.assumption}")
    for w in sys_.warnings:
        lines.append(f"warning: {w}")
    body = {
        "decomposition": report.decomposition_dict(ctx.decomp, ident),
        "compactification": report.compactification_dict(sys_),
    }
    _emit(ctx, "decompose", body, lines)
    return EXIT_OK


def cmd_balance(ctx):
    roots, failures = solve_balance(
        ctx.decomp, ctx.sys.compact, ctx.seeds("balance"), ctx.solve_tol, ctx.rank_tol
    )
    lines = [f"problem: {ctx.name}", f"balance-law roots: {len(roots)}"]
    body_roots = []
    for r in roots:
        v = existence_verdict(r, ctx.sys)
        lines.append(f"  Y0 = {_vec(r.Y0)}  Spec(A) = {{{', '.join(_fmt(z) for z in r.A_eigen.eigenvalues)}}}  {v.status}")
        body_roots.append(report.root_dict(r, v))
    body = {"roots": body_roots, "seed_failures": len(failures)}
    _emit(ctx, "balance", body, lines)
    return EXIT_OK if roots else EXIT_EMPTY


def cmd_horizon(ctx):
    sys_ = ctx.sys
    eqs, failures = find_horizon_equilibria(sys_, ctx.seeds("horizon"), ctx.solve_tol, ctx.rank_tol)
    lines = [f"problem: {ctx.name}", f"horizon equilibria: {len(eqs)}"]
    bad = False
    body_eqs = []
    for e in eqs:
        fails = equilibrium_failures(e, sys_.assumption, ctx.solve_tol) if e.forward else {}
        bad = bad or bool(fails)
        flag = f" [{', '.join(e.flags)}]" if e.flags else ""
        lines.append(
            f"  x* = {_vec(e.x_star)}  C* = {_fmt(e.C_star)}  Spec(Dg) = {{{', '.join(_fmt(z) for z in e.Dg_eigen.eigenvalues)}}}{flag}"
        )
        for k, v in fails.items():
            lines.append(f"    invariant {k} violated: {v:.3e}")
        d = report.equilibrium_dict(e)
        d["failures"] = {k: report.num(v) for k, v in fails.items()}
        body_eqs.append(d)
    body = {"compactification": report.compactification_dict(sys_), "equilibria": body_eqs}
    _emit(ctx, "horizon", body, lines)
    if bad:
        return EXIT_INVARIANT
    return EXIT_OK if eqs else EXIT_EMPTY


def cmd_correspond(ctx):
    sys_ = ctx.sys
    roots, _ = solve_balance(ctx.decomp, sys_.compact, ctx.seeds("balance"), ctx.solve_tol, ctx.rank_tol)
    eqs, _ = find_horizon_equilibria(sys_, ctx.seeds("horizon"), ctx.solve_tol, ctx.rank_tol)
    pairs = pair_up(roots, eqs, sys_, ctx.rank_tol)
    rep = build_correspondence(pairs, sys_, ctx.rank_tol)
    lines = [f"problem: {ctx.name}", f"assumption: {sys_.assumption}", f"pairs: {len(rep.pairs)}"]
    for w in sys_.warnings:
        lines.append(f"warning: {w}")
    for p in rep.pairs:
        lines.append(f"  Y0 = {_vec(p.root.Y0)} <-> x* = {_vec(p.equilibrium.x_star)}")
        lines.append(f"    C* = {_fmt(p.equilibrium.C_star)}, r = {_fmt(p.root.r)}")
        lines.append(f"    Spec(A) = {{{', '.join(_fmt(z) for z in p.root.A_eigen.eigenvalues)}}}")
        lines.append(f"    Spec(Dg) = {{{', '.join(_fmt(z) for z in p.equilibrium.Dg_eigen.eigenvalues)}}}")
        lines.append(f"    verdict: {p.verdict.status}; gap (m, m_A) = {p.gap}")
        if p.exception_branch:
            lines.append(f"    eigenvalue kC* exception: {p.exception_branch}")
        for k, v in p.failures.items():
            lines.append(f"    FAILED {k}: {v:.3e}")
    backward = [e for e in eqs if not e.forward]
    body = {
        "decomposition": report.decomposition_dict(ctx.decomp),
        "compactification": report.compactification_dict(sys_),
        "roots": [report.root_dict(r, existence_verdict(r, sys_)) for r in roots],
        "equilibria": [report.equilibrium_dict(e) for e in eqs],
        "excluded_equilibria": [
            {"x_star": report.arr(e.x_star), "flags": list(e.flags)} for e in backward
        ],
        "pairs": [report.pair_dict(p) for p in rep.pairs],
        "failures": {k: report.num(v) for k, v in sorted(rep.failures.items())},
    }
    _emit(ctx, "correspond", body, lines)
    if rep.failures:
        return EXIT_INVARIANT
    return EXIT_OK if rep.pairs else EXIT_EMPTY


def cmd_integrate(ctx):
    sys_ = ctx.sys
    n = ctx.field.n
    if (ctx.args.x0 is None) == (ctx.args.y0 is None):
        raise UsageError("give exactly one of --x0 or --y0")
    if ctx.args.y0 is not None:
        x0 = compactify_point(_parse_points(ctx.args.y0, n)[0], sys_.compact)
    else:
        x0 = _parse_points(ctx.args.x0, n)[0]
    traj = integrate(sys_, x0, ctx.args.tau_end, ctx.rtol, ctx.atol)
    if ctx.args.csv:
        traj.to_csv(ctx.args.csv, list(ctx.field.names))
    lines = [
        f"problem: {ctx.name}",
        f"x(0) = {_vec(x0)}  x(tau_end) = {_vec(traj.states[-1])}",
        f"p(x) at tau_end: {_fmt(float(traj.P[-1]) ** (1.0 / traj.two_c))}",
        f"log-kappa identity deviation: {_fmt(monitor_lemma_G(traj))}",
    ]
    body = {
        "x0": report.arr(x0),
        "x_end": report.arr(traj.states[-1]),
        "t_end": report.num(traj.t_physical[-1]),
        "log_kappa_identity_deviation": report.num(monitor_lemma_G(traj)),
    }
    if abs(traj.P[0] - 1.0) < 1e-12:
        drift = float(np.max(np.abs(traj.P - 1.0)))
        lines.append(f"horizon invariance drift: {_fmt(drift)}")
        body["horizon_drift"] = report.num(drift)
    try:
        est = estimate_tmax(sys_, x0, rtol=ctx.rtol, atol=ctx.atol)
        lines.append(f"t_max = {_fmt(est.t_max)} (tail {est.tail_bound:.2e}, converged: {est.converged})")
        body["t_max"] = {"value": report.num(est.t_max), "tail_bound": report.num(est.tail_bound),
                         "converged": est.converged}
    except BlowupError as exc:
        lines.append(f"t_max: {exc.name}: {exc}")
        body["t_max"] = {"error": exc.name}
    _emit(ctx, "integrate", body, lines)
    return EXIT_OK


def cmd_check_expansion(ctx):
    try:
        text = Path(ctx.args.expansion).read_text()
    except OSError:
        builtin = builtin_problem_dir() / f"{ctx.args.expansion}.toml"
        if not builtin.exists():
            raise UsageError(f"no such expansion file: {ctx.args.expansion}") from None
        text = builtin.read_text()
    spec = parse_expansion(text, ctx.field.names)
    params = ctx.spec.parameter_values()
    with mpmath.workdps(50):
        terms = [ExpansionTerm(c, real_expr(a, params), real_expr(p, params)) for c, a, p in spec.terms]
        fits = expansion_residual_order(ctx.field, terms, spec.t_max, spec.window)
    lines = [f"problem: {ctx.name}"]
    body = []
    for f in fits:
        nm = ctx.field.names[f.component]
        if f.status == "exact":
            lines.append(f"  {nm}: residual vanishes to working precision")
        else:
            lines.append(f"  {nm}: residual slope {f.slope:.6f} over {f.points} points")
        body.append({"component": nm, "status": f.status, "slope": report.num(f.slope), "points": f.points})
    _emit(ctx, "check-expansion", {"components": body}, lines)
    return EXIT_OK


COMMANDS = {
    "decompose": cmd_decompose,
    "balance": cmd_balance,
    "horizon": cmd_horizon,
    "correspond": cmd_correspond,
    "integrate": cmd_integrate,
    "check-expansion": cmd_check_expansion,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("problem", help="problem file or bundled problem name")
    common.add_argument("--rank-tol", type=float, default=None, help="relative rank tolerance for Jordan structure")
    common.add_argument("--solve-tol", type=float, default=None, help="Newton residual tolerance")
    common.add_argument("--rtol", type=float, default=None, help="integrator relative tolerance")
    common.add_argument("--atol", type=float, default=None, help="integrator absolute tolerance")
    common.add_argument("--seeds", default=None, help='Newton seeds, e.g. "1.5,1; 4,8"')
    common.add_argument("--no-default-seeds", action="store_true", help="use only explicit seeds")
    common.add_argument("--json", default=None, metavar="PATH", help="write a JSON report ('-' for stdout)")

    parser = argparse.ArgumentParser(prog="qhblowup", description="Type-I blow-up analysis of quasi-homogeneous ODEs")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("decompose", parents=[common], help="split the field into qh and residual parts")
    p.add_argument("--samples", type=int, default=100)
    sub.add_parser("balance", parents=[common], help="solve the balance law")
    sub.add_parser("horizon", parents=[common], help="find equilibria on the horizon")
    sub.add_parser("correspond", parents=[common], help="pair roots with equilibria and check the correspondence")
    p = sub.add_parser("integrate", parents=[common], help="integrate the desingularized flow")
    p.add_argument("--x0", default=None, help="initial point in compactified coordinates")
    p.add_argument("--y0", default=None, help="initial point in original coordinates")
    p.add_argument("--tau-end", type=float, default=50.0)
    p.add_argument("--csv", default=None, metavar="PATH", help="write the sampled trajectory")
    p = sub.add_parser("check-expansion", parents=[common], help="residual order of a truncated series")
    p.add_argument("expansion", help="expansion file")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        ctx = Context(args)
        return COMMANDS[args.command](ctx)
    except (UsageError, ProblemParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BlowupError as exc:
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
