"""Command-line interface: ``threshold-ou <command> [flags]``.

Commands write their resolved configuration next to the output
(``<out>.config.json``) or embed it in JSON output. ``threshold-ou replay
<config.json>`` reruns a command from that echo.

Exit codes: 0 success, 2 usage, 3 data or estimation failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from . import __version__
from .asymptotics import estimator_covariance
from .estimators import (
    EstimationError,
    estimate_case1,
    estimate_case2,
    estimate_case3,
)
from .experiments import ExperimentConfig, coverage_study, run_monte_carlo
from .model import TwoRegimeParams, analytic_conditional_moments, invariant_density
from .numerics import RootFindingError
from .simulate import derive_seed, simulate_path
from .stats import ConditionalMomentStats, empirical_moments

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    args: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"command": self.command, "args": self.args, "version": __version__}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        d = json.loads(text)
        return cls(d["command"], d["args"])

    def argv(self) -> List[str]:
        out = [self.command]
        for k, v in self.args.items():
            flag = "--" + k.replace("_", "-")
            if v is None or v is False:
                continue
            if v is True:
                out.append(flag)
            elif isinstance(v, list):
                out.append(flag)
                out.extend(str(x) for x in v)
            else:
                out.extend([flag, repr(v) if isinstance(v, float) else str(v)])
        return out


def f17(x) -> str:
    return format(float(x), ".17g")


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    # 17 significant digits round-trip every double; json uses repr, which is shortest-exact.
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IOError(f"cannot write {path}: {exc}") from exc


def _echo(args, command: str, out: Optional[str]) -> RunConfig:
    keys = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    rc = RunConfig(command, keys)
    if out:
        _write_text(out + ".config.json", rc.to_json() + "\n")
    return rc


def _params(args) -> TwoRegimeParams:
    try:
        return TwoRegimeParams(args.alpha1, args.alpha2, args.beta1, args.beta2, args.theta, args.sigma)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _add_params(p, theta_required=False):
    p.add_argument("--alpha1", type=float, required=True)
    p.add_argument("--alpha2", type=float, required=True)
    p.add_argument("--beta1", type=float, default=0.0)
    p.add_argument("--beta2", type=float, default=0.0)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)


# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    if args.refine < 1:
        raise UsageError("--refine must be at least 1")
    if not args.h > 0:
        raise UsageError("--h must be positive")
    p = _params(args)
    series = simulate_path(p, args.x0, args.h, args.n, args.refine, derive_seed(args.seed, args.stream), args.burn_in)
    _echo(args, "simulate", args.out)
    lines = ["k,t,x"]
    for k, x in enumerate(series.values, start=1):
        lines.append(f"{k},{f17(k * series.h)},{f17(x)}")
    _write_text(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def read_path_csv(path: str) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "x" not in reader.fieldnames:
                raise EstimationError(f"{path}: expected a header with column 'x'")
            return np.array([float(row["x"]) for row in reader])
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc}") from exc


def read_moments_json(path: str) -> ConditionalMomentStats:
    """Moment statistics file: ``{"theta", "orders", "left", "right", "N", "signed_left"}``."""
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc}") from exc
    orders = tuple(float(o) for o in d["orders"])
    N = int(d.get("N", 0))
    left, right = tuple(map(float, d["left"])), tuple(map(float, d["right"]))
    i0 = orders.index(0.0) if 0.0 in orders else None
    cl = int(round(left[i0] * N)) if i0 is not None else 0
    return ConditionalMomentStats(
        float(d["theta"]), orders, left, right, cl, N - cl, N, bool(d.get("signed_left", False))
    )


def write_moments_json(stats: ConditionalMomentStats, path: str) -> None:
    _write_text(path, _dumps({
        "theta": stats.theta, "orders": list(stats.orders), "left": list(stats.left),
        "right": list(stats.right), "N": stats.N, "signed_left": stats.signed_left,
    }))


def _resolve_case(args) -> str:
    case = args.case
    if case == "auto":
        if args.zero_beta:
            case = "I" if args.theta == 0 else "II"
        else:
            case = "III"
    if case == "I" and args.theta != 0:
        raise UsageError("Case I requires --theta 0")
    if case in ("II", "III") and args.theta == 0:
        raise UsageError(f"Case {case} requires --theta != 0")
    return case


def cmd_estimate(args) -> int:
    if not args.sigma > 0:
        raise UsageError("--sigma must be positive")
    if (args.input is None) == (args.moments is None):
        raise UsageError("give exactly one of --input (path CSV) or --moments (statistics JSON)")
    case = _resolve_case(args)
    n = args.order
    rc = _echo(args, "estimate", args.out)
    result = {"case": case, "config": {"command": rc.command, "args": rc.args}}
    x = None
    if args.input is not None:
        x = read_path_csv(args.input)
        if case == "I":
            stats = empirical_moments(x, 0.0, (0.0, n), signed_left=True)
        else:
            stats = empirical_moments(x, args.theta, (0, 1, 2))
    else:
        stats = read_moments_json(args.moments)
        if stats.theta != args.theta:
            raise UsageError("--theta differs from the threshold of the moment file")

    if case == "I":
        res = estimate_case1(stats, args.sigma, n)
        result["estimates"] = res.estimates
        result["diagnostics"] = res.diagnostics
        result["order"] = n
    elif case == "II":
        sol = estimate_case2(stats, args.sigma)
        result["estimates"] = {"alpha1": sol.alpha1_hat, "alpha2": sol.alpha2_hat}
        result["diagnostics"] = {"x_hat": sol.x_hat, "y_hat": sol.y_hat, **sol.diagnostics}
    else:
        sol = estimate_case3(stats, args.sigma)
        result["estimates"] = sol.estimates
        result["diagnostics"] = {
            "u_hat": sol.u_hat, "v_hat": sol.v_hat, "omega_hat": sol.omega_hat, "z_hat": sol.z_hat, **sol.diagnostics,
        }
    result["N"] = stats.N
    if args.se:
        if x is None:
            raise UsageError("--se needs a path (--input), not a moment file")
        d = estimator_covariance(x, case, args.theta, args.sigma, n, args.bandwidth, args.level)
        result["stderr"] = dict(zip(d.names, d.stderr))
        result["covariance"] = d.covariance
        if d.intervals is not None:
            result["intervals"] = dict(zip(d.names, d.intervals.tolist()))
    text = _dumps(result)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_density(args) -> int:
    p = _params(args)
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    dens = invariant_density(p)
    if args.lo is None or args.hi is None:
        s = float(max(p.to_general().scales()))
        mu = p.to_general().means()
        lo, hi = float(min(mu.min(), p.theta)) - 10 * s, float(max(mu.max(), p.theta)) + 10 * s
    else:
        lo, hi = args.lo, args.hi
    if not lo < hi:
        raise UsageError("--lo must be below --hi")
    _echo(args, "density", args.out)
    grid = np.linspace(lo, hi, args.points)
    psi = dens.pdf(grid)
    lines = ["x,psi"] + [f"{f17(a)},{f17(b)}" for a, b in zip(grid, psi)]
    _write_text(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_moments(args) -> int:
    p = _params(args)
    if args.signed_left and p.theta != 0:
        raise UsageError("--signed-left needs --theta 0")
    rc = _echo(args, "moments", args.out)
    dens = invariant_density(p)
    rows = []
    for n in args.order:
        mv = analytic_conditional_moments(p, n, args.signed_left)
        rows.append({"order": mv.order, "left": mv.left, "right": mv.right})
    out = {
        "params": asdict(p), "signed_left": args.signed_left, "moments": rows,
        "coefficients": dens.coefficients, "config": {"command": rc.command, "args": rc.args},
    }
    text = _dumps(out)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        raise IOError(f"cannot read {args.config}: {exc}") from exc
    try:
        config = ExperimentConfig.from_json(text)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid experiment config: {exc}") from exc
    threads = args.threads or 1
    _echo(args, "experiment", args.out)
    _write_text(args.out + ".experiment.json", config.to_json() + "\n")
    if args.coverage is not None:
        cov = coverage_study(config, args.coverage, threads)
        lines = ["param,level,coverage,R,failures"]
        for k, v in cov.coverage.items():
            lines.append(f"{k},{f17(cov.level)},{f17(v)},{cov.replications},{cov.failures}")
        _write_text(args.out, "\n".join(lines) + "\n")
        return EXIT_OK
    summary = run_monte_carlo(config, threads)
    _write_text(args.out, summary.to_csv())
    if args.mse_out:
        _write_text(args.mse_out, summary.mse_csv())
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        with open(args.config) as fh:
            rc = RunConfig.from_json(fh.read())
    except OSError as exc:
        raise IOError(f"cannot read {args.config}: {exc}") from exc
    return main(rc.argv())


# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="threshold-ou", description="Threshold OU simulation and moment estimation")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a sampled path to CSV (k,t,x)")
    _add_params(p)
    p.add_argument("--h", type=float, default=0.5)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--refine", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate drift parameters from a path or moment file")
    p.add_argument("--input")
    p.add_argument("--moments")
    p.add_argument("--case", choices=["I", "II", "III", "auto"], default="auto")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--order", type=float, default=2.0)
    p.add_argument("--zero-beta", action="store_true")
    p.add_argument("--se", action="store_true")
    p.add_argument("--bandwidth", default="andrews")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("density", help="tabulate the invariant density")
    _add_params(p)
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--points", type=int, default=2001)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("moments", help="analytic stationary conditional moments")
    _add_params(p)
    p.add_argument("--order", type=float, nargs="+", default=[0.0, 1.0, 2.0])
    p.add_argument("--signed-left", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("experiment", help="Monte Carlo table from an ExperimentConfig JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mse-out")
    p.add_argument("--coverage", type=float)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("replay", help="rerun a command from its config echo")
    p.add_argument("config")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "bandwidth", None) not in (None, "auto", "andrews"):
            try:
                args.bandwidth = int(args.bandwidth)
            except ValueError:
                raise UsageError("--bandwidth must be an integer, 'auto' or 'andrews'") from None
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"threshold-ou: usage error: {exc}\n")
        return EXIT_USAGE
    except IOError as exc:
        sys.stderr.write(f"threshold-ou: I/O error: {exc}\n")
        return EXIT_IO
    except (EstimationError, RootFindingError, ValueError, ArithmeticError) as exc:
        sys.stdout.write(_dumps({"error": type(exc).__name__, "message": str(exc)}))
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
