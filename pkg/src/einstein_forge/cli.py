"""Command-line front end.

    einstein-forge verify --catalog mercator-n4
    einstein-forge verify --metric "product(sphere(2), flat(1))"
    einstein-forge verify --metric "sphere(3)" --mode conformal --phi "cos(r)" --domain r=0.2:1.3
    einstein-forge solve warp --n 4 --k 1 --d 0.5 --u0 1.7320508 --x1 10
    einstein-forge solve extremal --c 2 --d -1.3333333 --emit csv --out orbit.csv
    einstein-forge classify --n 4 --kbar 0.25 --k 1 --c -0.75
    einstein-forge droplemma --m 3
    einstein-forge catalog list
    einstein-forge profile beltrami --emit csv

JSON reports go to stdout and a one-line summary to stderr.  Exit status is
0 when the check passes, 1 when it fails and 2 for usage or input errors.
The default tolerance 1e-7 can be changed with ``EINSTEIN_FORGE_TOL``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from . import __version__
from .errors import ForgeError

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_TOL = 1e-7


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def default_tol() -> float:
    raw = os.environ.get("EINSTEIN_FORGE_TOL")
    if raw is None:
        return DEFAULT_TOL
    try:
        tol = float(raw)
    except ValueError:
        raise UsageError(f"EINSTEIN_FORGE_TOL={raw!r} is not a number") from None
    if not tol > 0:
        raise UsageError("EINSTEIN_FORGE_TOL must be positive")
    return tol


def _parse_domain(items) -> dict:
    out = {}
    for item in items or []:
        name, _, rng = item.partition("=")
        sep = ":" if ":" in rng else ","
        lo, _, hi = rng.partition(sep)
        try:
            lo_f, hi_f = float(lo), float(hi)
        except ValueError:
            raise UsageError(f"bad domain {item!r}; expected name=lo:hi") from None
        if not (name and lo_f < hi_f):
            raise UsageError(f"bad domain {item!r}; expected name=lo:hi with lo < hi")
        out[name.strip()] = [lo_f, hi_f]
    return out


def _clean(obj):
    """JSON-safe copy: numpy scalars to floats, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def _report(command: str, inputs: dict, passed: bool, result) -> dict:
    return {
        "command": command,
        "inputs": inputs,
        "pass": bool(passed),
        "result": result,
        "version": __version__,
    }


def _emit(report: dict, out) -> None:
    out.write(json.dumps(_clean(report), indent=2) + "\n")


# ---------------------------------------------------------------------------
# Subcommands; each returns (report, summary line, csv text or None)
# ---------------------------------------------------------------------------


def cmd_verify(args):
    from .catalog import catalog_verify, get_entry, load_entry
    from .conformal import ConformalPair, conformally_einstein_residual
    from .curvature import einstein_residual, make_grid
    from .dsl import parse_metric

    domain = _parse_domain(args.domain)
    inputs = {"mode": args.mode, "grid": args.grid, "tol": args.tol, "domain": domain}
    if args.catalog or args.entry_file:
        entry = get_entry(args.catalog) if args.catalog else load_entry(args.entry_file)
        inputs["catalog"] = entry.name
        if args.mode == "einstein":
            rep = catalog_verify(entry, tol=args.tol, n=args.grid, domain=domain, parallel=args.parallel)
            summary = f"{entry.name}: {'PASS' if rep.passed else 'FAIL'} ({rep.kind}, residual {rep.residual:.3g})"
            return _report("verify", inputs, rep.passed, rep.to_dict()), summary, None
        pair = entry.conformal_pair()
        if pair is None and not args.phi:
            raise UsageError(f"catalog entry {entry.name!r} has no conformal pair; pass --phi")
        if args.phi:
            pair = ConformalPair.from_text(entry.spec(), args.phi)
        pair = ConformalPair(pair.inner.with_domain(domain), pair.phi, pair.functions)
    else:
        text = args.metric
        if args.metric_file:
            with open(args.metric_file, encoding="utf-8") as fh:
                text = fh.read()
        spec = parse_metric(text).with_domain(domain)
        inputs["metric"] = spec.text()
        if args.mode == "einstein":
            grid = make_grid(spec, args.grid)
            rep = einstein_residual(spec, grid, tol=args.tol, parallel=args.parallel)
            summary = f"einstein: {'PASS' if rep.passed else 'FAIL'} (lambda {rep.lambda_hat:.6g}, residual {rep.max_residual:.3g})"
            return _report("verify", inputs, rep.passed, rep.to_dict()), summary, None
        if not args.phi:
            raise UsageError("--mode conformal needs --phi")
        pair = ConformalPair.from_text(spec, args.phi)
    inputs["phi"] = str(args.phi or (entry.pair or {}).get("phi"))
    rep = conformally_einstein_residual(pair, tol=args.tol, n=args.grid)
    summary = f"conformal: {'PASS' if rep.passed else 'FAIL'} (residual {rep.max_residual:.3g})"
    return _report("verify", inputs, rep.passed, rep.to_dict()), summary, None


def cmd_solve(args):
    from . import odes

    fam = args.family
    span = (args.t0, args.t1) if fam != "warp" else None
    if fam == "brinkmann":
        p = odes.BrinkmannProblem(args.eps, args.k, args.phi0, args.dphi0, args.ddphi0)
        traj = odes.solve_brinkmann(p, span, args.step)
        inputs = {"eps": p.eps, "k": p.k, "initial": list(p.initial), "k_star": p.k_star}
        ok = True
    elif fam == "ft":
        p = odes.FtProblem(args.eps, args.kstar, args.f0, args.df0, args.kbar)
        traj = odes.solve_ft(p, span, args.step)
        inputs = {"eps": p.eps, "k_star": p.k_star, "f0": p.f0, "df0": p.df0, "k_bar": p.kbar_value}
        ok = True
    elif fam == "extremal":
        p = odes.ExtremalSurfaceParams(args.c, args.d, args.K0, args.dK0)
        traj = odes.solve_extremal(p, span, args.step).trajectory
        inputs = {"c": p.c, "d": p.d, "initial": list(p.initial)}
        states = traj.states[:, 0]
        traj_extra = {"K_range": [float(states.min()), float(states.max())]}
        ok = True
    else:
        x0 = args.x0
        x1 = args.x1 if args.x1 is not None else x0 + 10.0
        p = odes.IteratedWarpProblem(args.n, args.k, args.d, args.u0, args.du0, x0)
        sol = odes.solve_iterated_warp(p, (x0, x1), args.step)
        traj = sol.trajectory
        res = sol.iterated_residual()
        inputs = {"n": p.n, "k": p.k, "d": p.d, "kbar": p.kbar, "u0": p.u0, "du0": p.du0, "x0": x0}
        traj_extra = {
            "u_range": [float(traj.states[:, 0].min()), float(traj.states[:, 0].max())],
            "iterated_residual": float(abs(res).max()),
            "lambda": 2 * p.d,
        }
        ok = traj.truncated_at is None
    result = traj.summary()
    if fam in ("extremal", "warp"):
        result.update(traj_extra)
    result["step"] = args.step
    inv = ", ".join(f"{k} = {v[0]:.10g} (drift {result['drift'][k]:.2g})" for k, v in traj.invariants.items())
    summary = f"{fam}: {inv}" + (f", tag {traj.tag}" if traj.tag else "")
    csv_text = odes.write_csv(traj) if args.emit == "csv" else None
    return _report(f"solve {fam}", inputs, ok, result), summary, csv_text


def cmd_classify(args):
    from .classify import classify_warp

    v = classify_warp(args.n, args.kbar, args.k, args.c)
    inputs = {"n": args.n, "kbar": args.kbar, "k": args.k, "c": args.c}
    roots = ", ".join(f"{r:.12g}^{m}" for r, m in v.roots) or "none"
    summary = f"{v.type}" + (f" / {v.case}" if v.case else "") + f", roots {roots}"
    return _report("classify", inputs, v.type != "Degenerate", v.to_dict()), summary, None


def cmd_droplemma(args):
    from .classify import drop_instance, drop_polynomial

    if args.instance:
        n, alpha, beta = args.instance
        inst = drop_instance(int(n), alpha, beta)
        inputs = {"n": int(n), "alpha": alpha, "beta": beta}
        # the lemma predicts the two gammas never agree
        ok = inst.consistent and not inst.gammas_equal
        summary = f"gamma_A = {inst.gamma_A:.12g}, gamma_B = {inst.gamma_B:.12g}"
        return _report("droplemma", inputs, ok, inst.to_dict()), summary, None
    lo, hi = (args.m, args.m) if args.m is not None else tuple(args.range)
    reports = [drop_polynomial(m) for m in range(lo, hi + 1)]
    ok = all(r.no_positive_zero and r.recursion_ok and r.parity_positive for r in reports)
    result = [r.to_dict() for r in reports]
    summary = f"phi_m for m = {lo}..{hi}: {'no positive zero' if ok else 'check failed'}"
    return _report("droplemma", {"m": [lo, hi]}, ok, result if len(result) > 1 else result[0]), summary, None


def cmd_catalog(args):
    from .catalog import catalog_list, catalog_names, catalog_verify, get_entry

    if args.action == "list":
        items = catalog_list()
        return _report("catalog list", {}, True, items), f"{len(items)} entries", None
    if args.action == "show":
        if not args.names:
            raise UsageError("catalog show needs an entry name")
        shown = [get_entry(n).to_dict() for n in args.names]
        return _report("catalog show", {"names": args.names}, True, shown[0] if len(shown) == 1 else shown), "", None
    names = args.names or catalog_names()
    entries = [get_entry(n) for n in names]
    run = lambda e: catalog_verify(e, tol=args.tol, n=args.grid)  # noqa: E731
    if args.parallel and args.parallel > 1:
        with ThreadPoolExecutor(args.parallel) as pool:
            reps = list(pool.map(run, entries))
    else:
        reps = [run(e) for e in entries]
    ok = all(r.passed for r in reps)
    failed = [r.name for r in reps if not r.passed]
    summary = f"{len(reps) - len(failed)}/{len(reps)} passed" + (f"; failed: {', '.join(failed)}" if failed else "")
    result = [r.to_dict() for r in reps]
    return _report("catalog verify", {"names": names, "grid": args.grid, "tol": args.tol}, ok, result), summary, None


def cmd_profile(args):
    from .profiles import beltrami_profile, figure1_profile

    if args.kind == "figure1":
        prof = figure1_profile(args.c, args.d, args.K0, args.step)
        inputs = {"c": args.c, "d": args.d, "K0": args.K0, "step": args.step}
    else:
        prof = beltrami_profile(args.t_max, args.points)
        inputs = {"t_max": args.t_max, "points": args.points}
    s = prof.summary()
    summary = f"{args.kind}: {s['points']} points, t in [{s['t_range'][0]:.6g}, {s['t_range'][1]:.6g}]"
    csv_text = prof.csv() if args.emit == "csv" else None
    return _report(f"profile {args.kind}", inputs, True, s), summary, csv_text


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="einstein-forge", description="Curvature checks for conformally Einstein products.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, grid=True):
        sp.add_argument("--tol", type=float, default=None, help="tolerance (default 1e-7 or $EINSTEIN_FORGE_TOL)")
        if grid:
            sp.add_argument("--grid", type=int, default=64, help="number of grid points")
            sp.add_argument("--parallel", type=int, default=None, help="worker threads")

    def emit(sp):
        sp.add_argument("--emit", choices=["csv"], default=None, help="also produce CSV data")
        sp.add_argument("--out", default=None, help="write CSV here instead of stdout")

    v = sub.add_parser("verify", help="Einstein or conformally-Einstein check")
    src = v.add_mutually_exclusive_group(required=True)
    src.add_argument("--metric", help="metric text")
    src.add_argument("--metric-file", help="file containing metric text or a JSON envelope")
    src.add_argument("--catalog", help="catalog entry name")
    src.add_argument("--entry-file", help="catalog entry JSON file")
    v.add_argument("--mode", choices=["einstein", "conformal"], default="einstein")
    v.add_argument("--phi", help="conformal factor for --mode conformal")
    v.add_argument("--domain", action="append", metavar="NAME=LO:HI", help="override a coordinate range")
    common(v)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("solve", help="integrate an ODE family")
    fam = s.add_subparsers(dest="family", parser_class=_Parser)
    fam.required = True

    def span(sp, t1):
        sp.add_argument("--t0", type=float, default=0.0)
        sp.add_argument("--t1", type=float, default=t1)
        sp.add_argument("--step", type=float, default=1e-3)
        emit(sp)

    b = fam.add_parser("brinkmann")
    b.add_argument("--eps", type=int, choices=[1, -1], default=1)
    b.add_argument("--k", type=float, required=True)
    b.add_argument("--phi0", type=float, required=True)
    b.add_argument("--dphi0", type=float, required=True)
    b.add_argument("--ddphi0", type=float, default=None)
    span(b, 2 * math.pi)
    f = fam.add_parser("ft")
    f.add_argument("--eps", type=int, choices=[1, -1], default=1)
    f.add_argument("--kstar", type=float, required=True)
    f.add_argument("--f0", type=float, required=True)
    f.add_argument("--df0", type=float, required=True)
    f.add_argument("--kbar", type=float, default=None)
    span(f, 1.0)
    e = fam.add_parser("extremal")
    e.add_argument("--c", type=float, required=True)
    e.add_argument("--d", type=float, required=True)
    e.add_argument("--K0", type=float, default=None)
    e.add_argument("--dK0", type=float, default=None)
    span(e, 10.0)
    w = fam.add_parser("warp")
    w.add_argument("--n", type=int, required=True)
    w.add_argument("--k", type=float, required=True)
    w.add_argument("--d", type=float, required=True)
    w.add_argument("--u0", type=float, required=True)
    w.add_argument("--du0", type=float, default=0.0)
    w.add_argument("--x0", type=float, default=0.0)
    w.add_argument("--x1", type=float, default=None)
    w.add_argument("--step", type=float, default=1e-3)
    emit(w)
    for sp in (b, f, e, w):
        sp.set_defaults(func=cmd_solve)

    c = sub.add_parser("classify", help="completeness type of an iterated warp")
    for name in ("--n",):
        c.add_argument(name, type=int, required=True)
    for name in ("--kbar", "--k", "--c"):
        c.add_argument(name, type=float, required=True)
    c.set_defaults(func=cmd_classify)

    d = sub.add_parser("droplemma", help="drop-lemma polynomials and instances")
    g = d.add_mutually_exclusive_group(required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--range", type=int, nargs=2, metavar=("LO", "HI"))
    g.add_argument("--instance", type=float, nargs=3, metavar=("N", "ALPHA", "BETA"))
    d.set_defaults(func=cmd_droplemma)

    cat = sub.add_parser("catalog", help="list, show or verify catalog entries")
    cat.add_argument("action", choices=["list", "show", "verify"])
    cat.add_argument("names", nargs="*")
    common(cat)
    cat.set_defaults(func=cmd_catalog)

    pr = sub.add_parser("profile", help="surface-of-revolution profile data")
    pr.add_argument("kind", choices=["figure1", "beltrami"])
    pr.add_argument("--c", type=float, default=2.0)
    pr.add_argument("--d", type=float, default=-4 / 3)
    pr.add_argument("--K0", type=float, default=None)
    pr.add_argument("--step", type=float, default=1e-3)
    pr.add_argument("--t-max", type=float, default=6.0)
    pr.add_argument("--points", type=int, default=201)
    emit(pr)
    pr.set_defaults(func=cmd_profile)
    return p


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "tol", "absent") is None:
            args.tol = default_tol()
        if getattr(args, "grid", 64) < 1:
            raise UsageError("--grid must be positive")
        if getattr(args, "step", 1.0) <= 0:
            raise UsageError("--step must be positive")
        start = time.perf_counter()
        report, summary, csv_text = args.func(args)
        elapsed = time.perf_counter() - start
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except (ForgeError, KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and not isinstance(exc, ForgeError) else exc
        stderr.write(f"error: {msg}\n")
        return EXIT_USAGE
    if csv_text is not None and getattr(args, "out", None) is None:
        stdout.write(csv_text)
    else:
        if csv_text is not None:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(csv_text)
        _emit(report, stdout)
    if summary:
        stderr.write(f"{summary} [{elapsed:.2f}s]\n")
    return EXIT_PASS if report["pass"] else EXIT_FAIL


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
