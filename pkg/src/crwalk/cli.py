"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 numerical failure (divergence,
bracketing or convergence failures, or a failed verification check).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import bellman, effham, tfe, walk
from .env import parse_env_spec
from .verify import SUITES, run_suite


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return v
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.12g}")
    if isinstance(v, dict):
        return {k: _fmt(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_fmt(x) for x in v]
    return v


def parse_grid(text: str) -> np.ndarray:
    """lo:hi:step, inclusive of hi up to rounding."""
    try:
        lo, hi, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise UsageError(f"grid must be lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise UsageError("grid needs step > 0 and hi >= lo")
    k = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(k + 1)


def _thetas(args):
    if args.theta_grid is not None:
        return parse_grid(args.theta_grid)
    if args.theta is None:
        raise UsageError("one of --theta or --theta-grid is required")
    return np.array([args.theta])


def _require(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise UsageError(f"--{n.replace('_', '-')} is required for {args.command}")


def _env(args):
    return parse_env_spec(args.env, seed=args.seed, half_width=args.half_width)


def _emit(rows, args, single=False):
    """rows: list of flat dicts.  JSON emits the object itself when single."""
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in r.items()})
        text = buf.getvalue()
    else:
        payload = rows[0] if single and len(rows) == 1 else rows
        text = json.dumps(_fmt(payload), indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------------ commands


def cmd_tfe(args):
    _require(args, "beta")
    env = _env(args)
    rows = []
    for th in _thetas(args):
        kw = {"xtol": args.tol} if args.tol is not None and args.method != "direct-dp" else {}
        res = tfe.solve_lambda(env, args.beta, float(th), method=args.method,
                               n=args.n or 10_000, **kw)
        d = res.to_dict()
        if args.format == "csv":
            d = {k: d[k] for k in ("theta", "lambda", "flat", "method", "residual", "boundary")}
        rows.append(d)
    _emit(rows, args, single=True)
    return 0


def cmd_effham(args):
    _require(args, "beta", "delta")
    env = _env(args)
    lam = tfe.free_energy(env, args.beta)
    rows = effham.effham_rows(args.delta, args.beta, env.mean(), lam, _thetas(args))
    if args.format == "json" and args.theta_grid is None:
        rep = effham.regime_report(args.delta, args.beta, env.mean(), lam).to_dict()
        rows = [dict(rows[0], report=rep)]
    _emit(rows, args, single=True)
    return 0


def _problem(args, theta):
    return bellman.ControlProblem(_env(args), args.delta, args.beta, float(theta),
                                  args.n or 1000, args.start)


def cmd_bellman(args):
    _require(args, "beta", "delta")
    rows = []
    for th in _thetas(args):
        pr = _problem(args, th)
        tab = bellman.solve(pr)
        rows.append({"delta": pr.delta, "beta": pr.beta, "theta": pr.theta, "n": pr.n,
                     "start": pr.start, "value": tab.value, "value_per_step": tab.value / pr.n})
        if args.dump:
            tab.dump(args.dump)
    _emit(rows, args, single=True)
    return 0


def cmd_simulate(args):
    _require(args, "beta", "delta", "policy")
    policy = bellman.parse_policy(args.policy)
    rows = []
    for th in _thetas(args):
        pr = _problem(args, th)
        val = bellman.evaluate_policy(pr, policy).value
        opt = bellman.solve(pr).value
        rows.append({"policy": args.policy, "theta": pr.theta, "n": pr.n, "value": val,
                     "value_per_step": val / pr.n, "optimal_value": opt, "excess": val - opt})
    _emit(rows, args, single=True)
    return 0


def cmd_excursion(args):
    _require(args, "c")
    c = args.c
    row = {"c": c, "J": walk.excursion_J(c)}
    if args.ell is not None:
        row["ell"] = args.ell
        row["J_ell"] = walk.excursion_J_ell(c, args.ell)
    if args.m is not None:
        row["m"] = args.m
        row["mgf_rate"] = walk.excursion_count_mgf(args.m, c, args.ell)
    _emit([row], args, single=True)
    return 0


def cmd_verify(args):
    suite = args.suite or "all"
    if suite != "all" and suite not in SUITES:
        raise UsageError(f"unknown suite {suite!r}; choose from all, {', '.join(SUITES)}")
    results = run_suite(suite, seed=args.seed, tol_scale=args.tol_scale)
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for r in results:
            out.write(r.line() + "\n")
        failed = sum(not r.passed for r in results)
        out.write(f"{len(results) - failed}/{len(results)} checks passed\n")
    finally:
        if args.out:
            out.close()
    return 0 if failed == 0 else 2


COMMANDS = {"tfe": cmd_tfe, "effham": cmd_effham, "bellman": cmd_bellman,
            "simulate": cmd_simulate, "excursion": cmd_excursion, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crwalk", description="Controlled random walks in random potentials.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--env", default="iid:p=0.5",
                       help="periodic:v0,v1,... | iid:p=..,half_width=.. | markov:flip=.. | glued:p=.. | JSON")
        s.add_argument("--half-width", type=int, default=None)
        s.add_argument("--beta", type=float)
        s.add_argument("--delta", type=float)
        s.add_argument("--theta", type=float)
        s.add_argument("--theta-grid")
        s.add_argument("--n", type=int)
        s.add_argument("--start", type=int, default=0)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--tol", type=float, default=None)
        s.add_argument("--out")
        s.add_argument("--format", choices=("json", "csv"),
                       default="csv" if name == "effham" else "json")
        s.add_argument("--method", choices=("auto", "implicit", "direct-dp"), default="auto")
        s.add_argument("--policy")
        s.add_argument("--dump", help="write the final value slice as binary")
        s.add_argument("--c", type=float)
        s.add_argument("--ell", type=int)
        s.add_argument("--m", type=int, help="horizon of the excursion-count generating function")
        s.add_argument("--suite")
        s.add_argument("--tol-scale", type=float, default=1.0,
                       help="multiply every verification tolerance (negative forces failure)")
    return p


def _join_grid(argv):
    # "--theta-grid -1:1:0.5" would otherwise be read as an option
    out, it = [], iter(argv)
    for a in it:
        if a == "--theta-grid":
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _join_grid(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
        if args.delta is not None and not 0 <= args.delta <= 1:
            raise UsageError("--delta must lie in [0, 1]")
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ArithmeticError, RuntimeError, LookupError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:            # --help
        return int(e.code or 0)


if __name__ == "__main__":
    sys.exit(main())
