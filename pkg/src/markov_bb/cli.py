"""Command-line interface.

Exit codes: 0 on success, 1 for a domain error (invalid chain, density or
parameters, solver failure), 2 for I/O, parse and usage errors. Reports are
written to stdout, one-line summaries and warnings to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import asdict
from typing import List, Optional

import numpy as np

from . import io as mio
from .acceptance import run_all
from .action import action_linsq, l1_bounds, three_phase_path
from .calculus import l1_norm, mass
from .chain import MarkovChain, weighted_spectrum
from .distance import DEFAULTS, estimate_distance
from .errors import DomainError, InsufficientData, NonConvergence
from .flow import entropy_gap, estimate_decay, grad_norm_sq, integrate_flow, lojasiewicz_ratio
from .operators import default_params

COMMANDS = ("validate", "spectrum", "distance", "flow", "loja", "bounds", "demo")


class UsageError(Exception):
    """Option values outside their documented ranges."""


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="markov-bb", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--chain", help="chain JSON: {\"kernel\": [[...]], \"labels\": [...]}")
    parser.add_argument("--mu0", help="density JSON: {\"values\": [...]}")
    parser.add_argument("--mu1", help="density JSON")
    parser.add_argument("--rho0", help="initial density JSON for flow and loja")
    parser.add_argument("--params", help="params JSON: {\"a\", \"b\", \"p\", \"normalize_p\"}")
    parser.add_argument("--steps", type=int, default=DEFAULTS["n_steps"], help="time intervals (>= 2)")
    parser.add_argument("--restarts", type=_positive_int, default=DEFAULTS["restarts"])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--dt", type=float, default=None, help="flow step; default 0.01 min(a^2, b^2)")
    parser.add_argument("--t-max", type=float, default=200.0)
    parser.add_argument("--stop-tol", type=float, default=1e-10)
    parser.add_argument("--eps", type=float, default=0.1, help="lift of the explicit three-phase path")
    parser.add_argument("--out", help="write the path or trajectory CSV here")
    parser.add_argument("--format", choices=("json", "csv"), default="json",
                        help="stdout format for distance and flow")
    parser.add_argument("--full", action="store_true", help="demo: run the full-size acceptance suite")
    return parser


def _check_ranges(args):
    if args.steps < 2:
        raise UsageError("--steps must be at least 2")
    if args.dt is not None and not args.dt > 0:
        raise UsageError("--dt must be positive")
    if not 0 < args.eps < 1:
        raise UsageError("--eps must lie in (0, 1)")
    if not args.t_max > 0 or not args.stop_tol > 0:
        raise UsageError("--t-max and --stop-tol must be positive")


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command} needs {', '.join(missing)}")


def _load_common(args):
    _require(args, "chain")
    chain = mio.load_chain(args.chain)
    params = mio.load_params(args.params, chain) if args.params else default_params(chain)
    return chain, params


def _chain_summary(chain: MarkovChain) -> dict:
    return {
        "n": chain.n,
        "labels": list(chain.labels) if chain.labels is not None else None,
        "stationary": chain.stationary,
        "reversibility_defect": chain.reversibility_defect,
        "irreducible": True,
    }


def cmd_validate(args, out) -> int:
    _require(args, "chain")
    chain = mio.load_chain(args.chain)
    report = {"chain": _chain_summary(chain)}
    if args.params:
        params = mio.load_params(args.params, chain)
        report["params"] = {"a": params.a, "b": params.b, "p": params.p, "p_mass": mass(params.p, chain)}
    out.write(mio.dumps(report))
    print(f"valid: N={chain.n}, reversibility defect {chain.reversibility_defect:.2e}", file=sys.stderr)
    return 0


def cmd_spectrum(args, out) -> int:
    _require(args, "chain")
    chain = mio.load_chain(args.chain)
    out.write(mio.dumps(asdict(weighted_spectrum(chain))))
    return 0


def _densities(args, chain):
    _require(args, "mu0", "mu1")
    return mio.load_density(args.mu0, chain.n), mio.load_density(args.mu1, chain.n)


def _estimate(args, mu0, mu1, params, chain):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonConvergence)
        est = estimate_distance(mu0, mu1, params, chain, n_steps=args.steps, restarts=args.restarts,
                                seed=args.seed)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return est


def _sandwich(mu0, mu1, upper, params, chain, seed):
    bounds = l1_bounds(mu0, mu1, params, chain, upper, seed=seed)
    dist = l1_norm(mu0 - mu1, chain)
    return {
        "l1_distance": dist,
        "c": bounds.c,
        "C": bounds.C,
        "n_samples": bounds.n_samples,
        "lower_holds": bool(dist <= bounds.c * upper * (1 + 1e-12)),
        "upper_holds": bool(upper <= bounds.C * dist * (1 + 1e-12)),
    }


def cmd_distance(args, out) -> int:
    chain, params = _load_common(args)
    mu0, mu1 = _densities(args, chain)
    est = _estimate(args, mu0, mu1, params, chain)
    report = {
        "upper_bound": est.upper_bound,
        "lower_bound": est.lower_bound,
        "n_steps": est.n_steps,
        "restarts_used": est.restarts_used,
        "converged": est.converged,
        "path": {"times": est.path.times, "measures": est.path.measures, "sources": est.path.sources},
        "trace": [[it, val] for it, val in est.optimizer_trace],
        "l1_check": _sandwich(mu0, mu1, est.upper_bound, params, chain, args.seed),
    }
    csv_text = mio.path_csv(est.path)
    if args.out:
        mio.write_text(args.out, csv_text)
    out.write(csv_text if args.format == "csv" else mio.dumps(report))
    print(f"distance: upper {est.upper_bound:.6g}, lower {est.lower_bound:.6g}", file=sys.stderr)
    return 0


def cmd_bounds(args, out) -> int:
    chain, params = _load_common(args)
    mu0, mu1 = _densities(args, chain)
    est = _estimate(args, mu0, mu1, params, chain)
    explicit = three_phase_path(mu0, mu1, args.eps, max(1, args.steps // 3), params, chain)
    report = {
        "upper_bound": est.upper_bound,
        "lower_bound": est.lower_bound,
        "three_phase_upper": float(np.sqrt(action_linsq(explicit, params, chain))),
        "eps": args.eps,
        "l1_check": _sandwich(mu0, mu1, est.upper_bound, params, chain, args.seed),
    }
    out.write(mio.dumps(report))
    return 0


def cmd_flow(args, out) -> int:
    chain, params = _load_common(args)
    _require(args, "rho0")
    rho0 = mio.load_density(args.rho0, chain.n, strict=True)
    traj = integrate_flow(rho0, params, chain, dt=args.dt, t_max=args.t_max, stop_tol=args.stop_tol)
    report = {
        "t_final": traj.times[-1],
        "stopped_early": traj.stopped_early,
        "n_records": len(traj.times),
        "dt": traj.dt,
        "positivity_floor": traj.floor,
        "min_state": float(traj.min_state.min()),
        "l2_distance_final": float(traj.l2_distance[-1]),
        "spectral_gap": weighted_spectrum(chain).spectral_gap,
    }
    try:
        decay = estimate_decay(traj, chain, params, seed=args.seed)
    except InsufficientData as exc:
        report["decay"] = None
        if traj.gap[0] < 1e-13:
            summary = f"equilibrium: initial state is already at equilibrium (gap {traj.gap[0]:.1e})"
        else:
            summary = f"no decay fit: {exc}"
    else:
        report["decay"] = asdict(decay)
        summary = (f"fitted_rate {decay.fitted_rate:.6g}, loja_constant {decay.loja_constant:.6g}, "
                   f"final L2 distance {decay.l2_distance_final:.3e}")
    csv_text = mio.trajectory_csv(traj)
    if args.out:
        mio.write_text(args.out, csv_text)
    out.write(csv_text if args.format == "csv" else mio.dumps(report))
    print(summary, file=sys.stderr)
    return 0


def cmd_loja(args, out) -> int:
    chain, params = _load_common(args)
    _require(args, "rho0")
    rho = mio.load_density(args.rho0, chain.n, strict=True)
    ratio = lojasiewicz_ratio(rho, params, chain)
    report = {"ratio": ratio, "grad_norm_sq": grad_norm_sq(rho, params, chain),
              "entropy_gap": entropy_gap(rho, chain)}
    out.write(mio.dumps(report))
    return 0


def cmd_demo(args, out) -> int:
    results = run_all(quick=not args.full)
    for r in results:
        out.write(r.line() + "\n")
    failed = [r.number for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed", file=sys.stderr)
    return 1 if failed else 0


HANDLERS = {
    "validate": cmd_validate,
    "spectrum": cmd_spectrum,
    "distance": cmd_distance,
    "flow": cmd_flow,
    "loja": cmd_loja,
    "bounds": cmd_bounds,
    "demo": cmd_demo,
}


def main(argv: Optional[List[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _check_ranges(args)
        return HANDLERS[args.command](args, out)
    except DomainError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, mio.InputFormatError, UsageError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
