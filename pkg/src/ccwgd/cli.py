"""Command line front end.

Subcommands: capacity (particle solver), rd (rate-distortion particle solver),
ba (discrete fixed point), sweep (capacity over a parameter grid), check
(gradient self-test).  Exit codes: 0 success, 1 numerical abort (partial trace
is kept on disk), 2 configuration error.  Verbosity comes from the CCWGD_LOG
environment variable (error, info, debug).

All files are written with %.17g floats, so numbers round-trip exactly and
reruns of the same configuration produce byte-identical traces.
"""

import argparse
import concurrent.futures
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import wgd
from .ba import ba_solve, solve_for_budget
from .channels import FadingCsirChannel, FadingNoCsirChannel, MimoAwgnChannel, QuantizationError, awgn, random_mimo_matrix
from .core import ConfigurationError, QuadraticCost, save_particles
from .diagnostics import grad_check
from .estimator import EstimatorError
from .rd import SquaredErrorDistortion, rd_solve

log = logging.getLogger(__name__)

_CAP_COLUMNS = "iter,lambda,L_hat,R_hat,B_hat,grad_norm,w2_step"
_RD_COLUMNS = "iter,lambda,R_hat,D_hat,grad_norm"


def _g(v: float) -> str:
    return f"{v:.17g}"


class _TraceFile:
    """Streams trace rows so an aborted run keeps everything written so far."""

    def __init__(self, path, header: str):
        self._fh = open(path, "w", newline="")
        self._fh.write(header + "\n")

    def write_capacity(self, rec):
        self._fh.write(
            f"{rec.iteration},{_g(rec.lam)},{_g(rec.lagrangian)},{_g(rec.rate)},"
            f"{_g(rec.cost)},{_g(rec.grad_norm)},{_g(rec.w2_step)}\n"
        )
        self._fh.flush()

    def write_rd(self, rec):
        self._fh.write(
            f"{rec.iteration},{_g(rec.lam)},{_g(rec.rate)},{_g(rec.distortion)},{_g(rec.grad_norm)}\n"
        )
        self._fh.flush()

    def close(self):
        self._fh.close()


def _write_json(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_capacity(args) -> int:
    cfg = config_mod.resolve_config_arg(args.config)
    run = config_mod.resolve_capacity(cfg, seed_override=args.seed)
    out = _out_dir(args)
    trace = _TraceFile(out / "trace.csv", _CAP_COLUMNS)
    try:
        result = wgd.solve(
            run.channel, run.cost, run.solver, run.dual, run.importance,
            trace_writer=trace.write_capacity,
        )
    except wgd.SolveAbort as exc:
        trace.close()
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 1
    finally:
        trace.close()
    save_particles(out / "particles.csv", result.particles, seed=run.solver.seed)
    _write_json(out / "result.json", {
        "rate_nats": result.rate,
        "cost": result.cost,
        "lambda": result.lam,
        "iterations": result.iterations,
        "stop_reason": result.stop_reason,
        "seed": run.solver.seed,
        "config": run.echo,
    })
    print(f"rate_nats={result.rate:.6f} cost={result.cost:.6f} lambda={result.lam:.6f} "
          f"stop={result.stop_reason} iters={result.iterations}")
    return 0


def cmd_rd(args) -> int:
    cfg = config_mod.resolve_config_arg(args.config)
    run = config_mod.resolve_rd(cfg, seed_override=args.seed)
    out = _out_dir(args)
    trace = _TraceFile(out / "trace.csv", _RD_COLUMNS)
    try:
        result = rd_solve(run.problem, run.solver, trace_writer=trace.write_rd)
    except wgd.SolveAbort as exc:
        trace.close()
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 1
    finally:
        trace.close()
    save_particles(out / "particles.csv", result.particles, seed=run.solver.seed)
    _write_json(out / "result.json", {
        "rate_nats": result.rate,
        "distortion": result.distortion,
        "lambda": run.problem.lam,
        "iterations": result.iterations,
        "stop_reason": result.stop_reason,
        "seed": run.solver.seed,
        "config": run.echo,
    })
    print(f"rate_nats={result.rate:.6f} distortion={result.distortion:.6f} "
          f"stop={result.stop_reason} iters={result.iterations}")
    return 0


def cmd_ba(args) -> int:
    cfg = config_mod.resolve_config_arg(args.config)
    run = config_mod.resolve_ba(cfg)
    out = _out_dir(args)
    kwargs = dict(tau=run.tau, tol=run.tol, max_iters=run.max_iters)
    if run.budget is not None:
        lam, res = solve_for_budget(run.channel, run.budget, **kwargs)
        payload = {
            "capacity_nats": res.capacity_nats,
            "mean_cost": res.mean_cost,
            "lambda": lam,
            "budget": run.budget,
            "iterations": res.iterations,
            "converged": res.converged,
            "config": run.echo,
        }
        _write_json(out / "result.json", payload)
        print(f"capacity_nats={res.capacity_nats:.6f} mean_cost={res.mean_cost:.6f} lambda={lam:.6f}")
        return 0
    points = [(lam, ba_solve(run.channel, lam=lam, **kwargs)) for lam in run.lams]
    if len(points) > 1:
        with open(out / "ba_sweep.csv", "w", newline="") as fh:
            fh.write("lambda,capacity_nats,mean_cost,iterations,converged\n")
            for lam, res in points:
                fh.write(f"{_g(lam)},{_g(res.capacity_nats)},{_g(res.mean_cost)},"
                         f"{res.iterations},{int(res.converged)}\n")
    lam, res = points[-1]
    _write_json(out / "result.json", {
        "capacity_nats": res.capacity_nats,
        "mean_cost": res.mean_cost,
        "lambda": lam,
        "iterations": res.iterations,
        "converged": res.converged,
        "points": [
            {"lambda": l, "capacity_nats": r.capacity_nats, "mean_cost": r.mean_cost} for l, r in points
        ],
        "config": run.echo,
    })
    print(f"capacity_nats={res.capacity_nats:.6f} mean_cost={res.mean_cost:.6f} lambda={lam:.6f}")
    return 0


def _sweep_point(payload):
    """One grid point; runs in a worker process, so everything must pickle."""
    base, param, value, seed = payload
    try:
        run = config_mod.apply_sweep_value(base, param, value, seed)
        result = wgd.solve(run.channel, run.cost, run.solver, run.dual, run.importance)
        return {
            "param": value,
            "rate_nats": result.rate,
            "cost": result.cost,
            "lambda": result.lam,
            "iterations": result.iterations,
        }
    except (ConfigurationError, wgd.SolveAbort, EstimatorError, FloatingPointError) as exc:
        return {"param": value, "error": str(exc)}


def cmd_sweep(args) -> int:
    cfg = config_mod.resolve_config_arg(args.config)
    run = config_mod.resolve_sweep(cfg, seed_override=args.seed)
    out = _out_dir(args)
    payloads = [(run.base, run.param, v, args.seed) for v in run.values]
    if args.threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(_sweep_point, payloads))
    else:
        rows = [_sweep_point(p) for p in payloads]
    failures = 0
    with open(out / "sweep.csv", "w", newline="") as fh:
        fh.write("param,rate_nats,cost,lambda,iterations\n")
        for row in rows:  # grid order, failed points omitted
            if "error" in row:
                failures += 1
                print(f"sweep point {run.param}={row['param']:g} failed: {row['error']}", file=sys.stderr)
                continue
            fh.write(f"{_g(row['param'])},{_g(row['rate_nats'])},{_g(row['cost'])},"
                     f"{_g(row['lambda'])},{row['iterations']}\n")
    done = len(rows) - failures
    print(f"sweep: {done}/{len(rows)} points completed")
    return 1 if failures else 0


def cmd_check(args) -> int:
    rng = np.random.default_rng(7)
    threshold = 1e-5
    channels = [
        ("awgn", awgn()),
        ("mimo-awgn 2x2", MimoAwgnChannel(random_mimo_matrix(2, 2, seed=3))),
        ("fading-csir", FadingCsirChannel()),
        ("fading-nocsir", FadingNoCsirChannel()),
    ]
    failures = 0
    for name, chan in channels:
        pts = [
            (rng.normal(size=chan.input_dim), rng.normal(size=chan.output_dim))
            for _ in range(8)
        ]
        err = grad_check(chan, pts)
        ok = err <= threshold
        failures += 0 if ok else 1
        print(f"grad check {name:<16s} max rel err {err:.3e}  {'ok' if ok else 'FAIL'}")
    cost_err = grad_check(QuadraticCost(), [rng.normal(size=3) for _ in range(8)])
    ok = cost_err <= threshold
    failures += 0 if ok else 1
    print(f"grad check {'quadratic-cost':<16s} max rel err {cost_err:.3e}  {'ok' if ok else 'FAIL'}")
    dist_err = grad_check(
        SquaredErrorDistortion(),
        [(rng.normal(size=2), rng.normal(size=2)) for _ in range(8)],
    )
    ok = dist_err <= threshold
    failures += 0 if ok else 1
    print(f"grad check {'squared-error':<16s} max rel err {dist_err:.3e}  {'ok' if ok else 'FAIL'}")
    return 1 if failures else 0


def _setup_logging():
    name = os.environ.get("CCWGD_LOG", "error").strip().lower()
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(name, logging.ERROR)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccwgd",
        description="Capacity-cost and rate-distortion solvers driven by particle gradient descent.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = [
        ("capacity", cmd_capacity, "run the capacity-cost particle solver"),
        ("rd", cmd_rd, "run the rate-distortion particle solver"),
        ("ba", cmd_ba, "run the discrete fixed-point solver"),
        ("sweep", cmd_sweep, "run capacity over a grid of budgets or slopes"),
    ]
    for name, fn, help_text in specs:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="config file path or preset name")
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        sp.add_argument("--seed", type=int, default=None, help="override the solver seed")
        sp.add_argument("--threads", type=int, default=1, help="parallel workers (sweep only)")
        sp.set_defaults(fn=fn)
    sp = sub.add_parser("check", help="verify analytic gradients against finite differences")
    sp.set_defaults(fn=cmd_check)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and args.seed < 0:
        print("config error: --seed must be a non-negative integer", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except (ConfigurationError, QuantizationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (wgd.SolveAbort, EstimatorError, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
