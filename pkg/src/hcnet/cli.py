"""Command-line front end: ``hcnet <command> NETWORK [flags]``.

NETWORK is a JSON file or the name of a shipped network (``diamond``,
``chain3``, ...). Reports go to stdout as JSON with 17 significant digits.

Exit codes: 0 success, 1 invalid network or flags, 2 numerical failure,
3 precondition violated.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .dynamics import (
    SimConfig,
    energy_balance,
    find_equilibrium,
    lasalle_check,
    limit_system,
    rigidity_check,
    simulate,
    simulate_ensemble,
    write_trajectory_csv,
)
from .errors import HCNError, NumericalError, PreconditionError, SpecError
from .harmonic import analyze, invariant_quadratics, tilt_residual, tilted_covariance
from .lie import hormander_rank
from .matkernel import rank_eps
from .network import builtin_names, load_builtin, load_network

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2
EXIT_PRECONDITION = 3


class UsageError(Exception):
    """Bad command-line flags."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written at 17 significant digits (non-finite as null)."""

    def enc(x, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(x, (bool, np.bool_)):
            return "true" if x else "false"
        if x is None:
            return "null"
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        if isinstance(x, (float, np.floating)):
            x = float(x)
            return format(x, ".17g") if math.isfinite(x) else "null"
        if isinstance(x, str):
            return json.dumps(x)
        if isinstance(x, np.ndarray):
            return enc(x.tolist(), level)
        if isinstance(x, dict):
            if not x:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in x.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(x, (list, tuple)):
            if not x:
                return "[]"
            if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in x):
                return "[" + ", ".join(enc(v, level + 1) for v in x) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in x) + "\n" + end + "]"
        raise TypeError(f"cannot encode {type(x).__name__}")

    return enc(obj, 0)


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()], dtype=float)
    except ValueError:
        raise UsageError(f"expected a comma separated list of numbers, got {text!r}") from None


def _positive(kind=float):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{text!r} is not a valid {kind.__name__}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{text!r} must be positive")
        return v

    return parse


def _nonnegative_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be non-negative")
    return v


def _load(ref: str):
    path = Path(ref)
    if path.exists():
        return load_network(path)
    if ref in builtin_names():
        return load_builtin(ref)
    raise UsageError(f"network file {ref!r} not found (shipped networks: {', '.join(builtin_names())})")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hcnet", description="Analysis and simulation of heat conduction networks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("network", help="network JSON file or shipped network name")
        return sp

    cmd("analyze", "controllability dimensions, asymmetry, invariant quadratics")
    cmd("stationary", "stationary covariance Q and its rank (asymmetric harmonic networks)")

    sp = cmd("tilt", "tilted Gibbs covariance Q_gamma for a symmetric network")
    sp.add_argument("--gamma", type=_nonnegative_float, required=True)
    sp.add_argument("--index", type=int, default=0, help="which invariant quadratic to tilt by")

    sp = cmd("simulate", "sample path(s) written as CSV")
    sp.add_argument("--t", dest="horizon", type=_nonnegative_float, required=True, help="time horizon")
    sp.add_argument("--dt", type=_positive(), required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scheme", choices=["euler-maruyama", "exact-gaussian"], default="euler-maruyama")
    sp.add_argument("--out", help="CSV path (stdout when omitted); with --paths k, one file per path")
    sp.add_argument("--paths", type=_positive(int), default=1)
    sp.add_argument("--thin", type=_positive(int), default=1, help="keep every k-th step")
    sp.add_argument("--z0", help="initial state q1..qN,p1..pN (default: the equilibrium)")

    sp = cmd("lasalle", "damped-flow probe of the stability condition")
    sp.add_argument("--samples", type=_positive(int), default=10)
    sp.add_argument("--radius", type=_positive(), default=1.0)
    sp.add_argument("--T", type=_positive(), default=200.0)
    sp.add_argument("--dt", type=_positive(), default=0.05)
    sp.add_argument("--eta", type=_positive(), default=1e-3)
    sp.add_argument("--seed", type=int, default=0)

    sp = cmd("rigidity", "high-energy limit flow check")
    sp.add_argument("--samples", type=_positive(int), default=10)
    sp.add_argument("--T", type=_positive(), default=50.0)
    sp.add_argument("--dt", type=_positive(), default=0.01)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threshold", type=_positive(), default=None)

    sp = cmd("hormander", "rank of the Lie brackets at a point")
    sp.add_argument("--point", required=True, help="q1..qN,p1..pN")
    sp.add_argument("--depth", type=_positive(int), default=None, help="bracket levels (default 2N)")
    return p


def _report(out, obj):
    out.write(dumps(obj) + "\n")


def _analyze(spec, args, out):
    _report(out, {"network": spec.name, **analyze(spec).to_dict()})


def _stationary(spec, args, out):
    rep = analyze(spec)
    if not rep.asymmetric:
        _report(out, {"network": spec.name, "asymmetric": False,
                      "invariant_quadratics": [k.to_dict() for k in rep.invariants]})
        k = rep.invariants[0] if rep.invariants else None
        msg = "network is not asymmetric: the invariant measure is not unique"
        if k is not None:
            msg += f"; conserved K = {k.alpha:.17g} <z,q>^2 + <z,p>^2 with z = {list(map(float, k.z))}"
        raise PreconditionError(msg)
    if rep.Q is None:
        raise NumericalError(f"spectral abscissa {rep.abscissa:.3g} too close to zero to solve for Q")
    _report(out, {"network": spec.name, "Q": rep.Q, "rank": rep.rank_q, "rank_eps": rank_eps()})


def _tilt(spec, args, out):
    quads = invariant_quadratics(spec)
    if not quads:
        raise PreconditionError("network is asymmetric: no invariant quadratic to tilt by")
    if not 0 <= args.index < len(quads):
        raise UsageError(f"--index must be in [0, {len(quads) - 1}]")
    k = quads[args.index]
    Q = tilted_covariance(spec, k, args.gamma)
    _report(out, {"network": spec.name, "gamma": args.gamma, "alpha": k.alpha, "z": k.z,
                  "Q": Q, "residual": tilt_residual(spec, Q)})


def _simulate(spec, args, out):
    cfg = SimConfig(dt=args.dt, horizon=args.horizon, seed=args.seed, scheme=args.scheme, thin=args.thin)
    if args.z0 is not None:
        z0 = _floats(args.z0)
        if z0.size != spec.dim:
            raise UsageError(f"--z0 needs {spec.dim} numbers, got {z0.size}")
    else:
        z0 = find_equilibrium(spec).z
    if args.paths == 1:
        res = simulate(spec, z0, cfg)
        if args.out is None:
            write_trajectory_csv(out, res, spec.n)
            return
        with open(args.out, "w", newline="") as fh:
            write_trajectory_csv(fh, res, spec.n)
        _report(out, {"network": spec.name, "csv": args.out, "ledger": res.ledger.to_dict()})
        return
    if args.out is None:
        raise UsageError("--paths > 1 needs --out")
    results = simulate_ensemble(spec, cfg, args.paths, z0=z0)
    base = Path(args.out)
    files = []
    for k, res in enumerate(results):
        path = base.with_name(f"{base.stem}_path{k:03d}{base.suffix or '.csv'}")
        with open(path, "w", newline="") as fh:
            write_trajectory_csv(fh, res, spec.n)
        files.append(str(path))
    _report(out, {
        "network": spec.name,
        "csv": files,
        "ledgers": [r.ledger.to_dict() for r in results],
        "energy_balance": energy_balance(spec, results).to_dict(),
    })


def _lasalle(spec, args, out):
    rep = lasalle_check(spec, args.samples, args.radius, args.T, args.dt, args.eta, seed=args.seed)
    _report(out, {"network": spec.name, **rep.to_dict()})


def _rigidity(spec, args, out):
    lim = limit_system(spec)
    rep = rigidity_check(lim, args.samples, args.T, args.dt, seed=args.seed, threshold=args.threshold)
    _report(out, {"network": spec.name, "limit": lim.to_dict(), **rep.to_dict()})


def _hormander(spec, args, out):
    point = _floats(args.point)
    if point.size != spec.dim:
        raise UsageError(f"--point needs {spec.dim} numbers, got {point.size}")
    _report(out, hormander_rank(spec, point, args.depth).to_dict())


COMMANDS = {
    "analyze": _analyze,
    "stationary": _stationary,
    "tilt": _tilt,
    "simulate": _simulate,
    "lasalle": _lasalle,
    "rigidity": _rigidity,
    "hormander": _hormander,
}


def run(argv=None, out=None, err=None) -> int:
    """Run one command; returns the exit code instead of exiting."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        try:
            rank_eps()  # validate HCN_RANK_EPS before any work
        except PreconditionError as exc:
            raise UsageError(str(exc)) from None
        spec = _load(args.network)
        COMMANDS[args.command](spec, args, out)
    except (UsageError, SpecError, OSError) as exc:
        err.write(f"hcnet: error: {exc}\n")
        return EXIT_INVALID
    except NumericalError as exc:
        err.write(f"hcnet: numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except PreconditionError as exc:
        err.write(f"hcnet: precondition violated: {exc}\n")
        return EXIT_PRECONDITION
    except HCNError as exc:
        err.write(f"hcnet: {exc}\n")
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
