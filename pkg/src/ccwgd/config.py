"""JSON run configurations: validation, resolution, and reproducible echoes.

Every resolve_* function turns a config dict into ready-to-run solver objects
plus an echo dict: the same configuration with every default and every random
draw (e.g. a sampled channel matrix) materialized.  Feeding the echo back in
reproduces the run bit for bit.  Validation errors name the offending key
path; the CLI maps them to exit code 2.
"""

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .channels import (
    DiscreteChannel,
    FadingCsirChannel,
    FadingNoCsirChannel,
    MimoAwgnChannel,
    awgn,
    quantize_channel,
    random_mimo_matrix,
)
from .core import (
    ChannelModel,
    ConfigurationError,
    CostModel,
    DualConfig,
    GaussianInit,
    PointInit,
    QuadraticCost,
    SolverConfig,
    StepSchedule,
)
from .estimator import ImportanceConfig
from .rd import RDProblem, SquaredErrorDistortion

__all__ = [
    "CapacityRun",
    "RdRun",
    "BaRun",
    "SweepRun",
    "load_config",
    "resolve_config_arg",
    "preset_names",
    "resolve_capacity",
    "resolve_rd",
    "resolve_ba",
    "resolve_sweep",
]


@dataclass(frozen=True)
class CapacityRun:
    channel: ChannelModel
    cost: CostModel
    solver: SolverConfig
    dual: DualConfig
    importance: ImportanceConfig
    echo: dict


@dataclass(frozen=True)
class RdRun:
    problem: RDProblem
    solver: SolverConfig
    echo: dict


@dataclass(frozen=True)
class BaRun:
    channel: DiscreteChannel
    lams: list[float] | None
    budget: float | None
    tau: float
    tol: float
    max_iters: int
    echo: dict


@dataclass(frozen=True)
class SweepRun:
    param: str
    values: list[float]
    base: dict
    echo: dict


def load_config(path) -> dict:
    try:
        with open(path, "r") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON ({exc})")
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"{path}: top level must be a JSON object")
    return cfg


def preset_names() -> list[str]:
    root = resources.files("ccwgd") / "presets"
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_config_arg(arg: str) -> dict:
    """--config accepts a filesystem path or the name of a shipped preset."""
    p = Path(arg)
    if p.exists():
        return load_config(p)
    candidate = resources.files("ccwgd") / "presets" / f"{arg}.json"
    if candidate.is_file():
        return json.loads(candidate.read_text())
    raise ConfigurationError(
        f"config {arg!r} is neither a file nor a preset (presets: {', '.join(preset_names())})"
    )


def _check_keys(d: dict, allowed: set[str], path: str):
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigurationError(f"{path}: unknown key {unknown[0]!r} (allowed: {', '.join(sorted(allowed))})")


def _field(d: dict, key: str, path: str, kind=None, default="__required__"):
    if key not in d:
        if default == "__required__":
            raise ConfigurationError(f"{path}.{key}: missing required field")
        return default
    val = d[key]
    if kind is not None and not isinstance(val, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ConfigurationError(f"{path}.{key}: expected {names}, got {type(val).__name__}")
    return val


def _number(d: dict, key: str, path: str, default="__required__") -> float:
    val = _field(d, key, path, kind=(int, float), default=default)
    if isinstance(val, bool):
        raise ConfigurationError(f"{path}.{key}: expected a number, got a bool")
    return val


def _wrap(path: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}")


def _resolve_channel(spec, path: str) -> ChannelModel:
    if not isinstance(spec, dict):
        raise ConfigurationError(f"{path}: expected an object with a 'kind' field")
    kind = _field(spec, "kind", path, kind=str)
    if kind == "awgn":
        _check_keys(spec, {"kind"}, path)
        return awgn()
    if kind == "mimo-awgn":
        _check_keys(spec, {"kind", "matrix", "random"}, path)
        if ("matrix" in spec) == ("random" in spec):
            raise ConfigurationError(f"{path}: give exactly one of 'matrix' or 'random'")
        if "matrix" in spec:
            return _wrap(path, MimoAwgnChannel, spec["matrix"])
        rnd = _field(spec, "random", path, kind=dict)
        _check_keys(rnd, {"outputs", "inputs", "seed"}, f"{path}.random")
        h = random_mimo_matrix(
            int(_number(rnd, "outputs", f"{path}.random")),
            int(_number(rnd, "inputs", f"{path}.random")),
            int(_number(rnd, "seed", f"{path}.random", default=0)),
        )
        return MimoAwgnChannel(h)
    if kind == "fading-csir":
        _check_keys(spec, {"kind"}, path)
        return FadingCsirChannel()
    if kind == "fading-nocsir":
        _check_keys(spec, {"kind"}, path)
        return FadingNoCsirChannel()
    raise ConfigurationError(f"{path}.kind: unknown channel kind {kind!r}")


def _channel_echo(channel: ChannelModel) -> dict:
    if isinstance(channel, MimoAwgnChannel):
        if channel.matrix.shape == (1, 1) and channel.matrix[0, 0] == 1.0:
            return {"kind": "awgn"}
        return {"kind": "mimo-awgn", "matrix": channel.matrix.tolist()}
    if isinstance(channel, FadingCsirChannel):
        return {"kind": "fading-csir"}
    if isinstance(channel, FadingNoCsirChannel):
        return {"kind": "fading-nocsir"}
    raise ConfigurationError(f"cannot echo channel type {type(channel).__name__}")


def _resolve_cost(spec, path: str) -> CostModel:
    spec = spec if spec is not None else {"kind": "quadratic"}
    kind = _field(spec, "kind", path, kind=str, default="quadratic")
    if kind != "quadratic":
        raise ConfigurationError(f"{path}.kind: unknown cost kind {kind!r}")
    _check_keys(spec, {"kind", "weight"}, path)
    return _wrap(path, QuadraticCost, _number(spec, "weight", path, default=1.0))


def _cost_echo(cost: CostModel) -> dict:
    return {"kind": "quadratic", "weight": cost.weight}


def _resolve_init(spec, path: str):
    if spec is None:
        return None
    kind = _field(spec, "kind", path, kind=str)
    if kind == "gaussian":
        _check_keys(spec, {"kind", "dim", "mean", "cov"}, path)
        dim = int(_number(spec, "dim", path))
        mean = spec.get("mean", 0.0)
        cov = spec.get("cov", 1.0)
        return _wrap(
            path,
            GaussianInit,
            dim=dim,
            mean=np.asarray(mean, dtype=np.float64) if isinstance(mean, list) else float(mean),
            cov=np.asarray(cov, dtype=np.float64) if isinstance(cov, list) else float(cov),
        )
    if kind == "points":
        _check_keys(spec, {"kind", "points"}, path)
        return _wrap(path, PointInit, np.asarray(_field(spec, "points", path, kind=list), dtype=np.float64))
    raise ConfigurationError(f"{path}.kind: unknown init kind {kind!r}")


def _init_echo(init) -> dict | None:
    if init is None:
        return None
    if isinstance(init, GaussianInit):
        mean = np.asarray(init.mean)
        cov = np.asarray(init.cov)
        return {
            "kind": "gaussian",
            "dim": init.dim,
            "mean": float(mean) if mean.ndim == 0 else mean.tolist(),
            "cov": float(cov) if cov.ndim == 0 else cov.tolist(),
        }
    return {"kind": "points", "points": init.points.tolist()}


def _resolve_step(spec, path: str) -> StepSchedule:
    spec = spec if spec is not None else {}
    _check_keys(spec, {"kind", "tau0", "decay", "beta1", "beta2", "eps"}, path)
    kwargs = {"kind": _field(spec, "kind", path, kind=str, default="polynomial")}
    for key in ("tau0", "decay", "beta1", "beta2", "eps"):
        if key in spec:
            kwargs[key] = float(_number(spec, key, path))
    return _wrap(path, StepSchedule, **kwargs)


def _step_echo(step: StepSchedule) -> dict:
    out = {"kind": step.kind, "tau0": step.tau0}
    if step.kind == "polynomial":
        out["decay"] = step.decay
    if step.kind == "adaptive":
        out.update(beta1=step.beta1, beta2=step.beta2, eps=step.eps)
    return out


def _resolve_solver(spec, path: str, seed_override=None, default_particles=None) -> SolverConfig:
    spec = spec if spec is not None else {}
    allowed = {"num_particles", "is_samples", "max_iters", "step", "init", "seed", "grad_tol", "trace_stride"}
    _check_keys(spec, allowed, path)
    if default_particles is None and "num_particles" not in spec:
        raise ConfigurationError(f"{path}.num_particles: missing required field")
    seed = int(_number(spec, "seed", path, default=0))
    if seed_override is not None:
        seed = int(seed_override)
    return _wrap(
        path,
        SolverConfig,
        num_particles=int(_number(spec, "num_particles", path, default=default_particles)),
        is_samples=int(_number(spec, "is_samples", path, default=256)),
        max_iters=int(_number(spec, "max_iters", path, default=1000)),
        step=_resolve_step(spec.get("step"), f"{path}.step"),
        init=_resolve_init(spec.get("init"), f"{path}.init"),
        seed=seed,
        grad_tol=float(_number(spec, "grad_tol", path, default=1e-4)),
        trace_stride=int(_number(spec, "trace_stride", path, default=1)),
    )


def _solver_echo(solver: SolverConfig) -> dict:
    return {
        "num_particles": solver.num_particles,
        "is_samples": solver.is_samples,
        "max_iters": solver.max_iters,
        "step": _step_echo(solver.step),
        "init": _init_echo(solver.init),
        "seed": solver.seed,
        "grad_tol": solver.grad_tol,
        "trace_stride": solver.trace_stride,
    }


def _resolve_dual(spec, path: str) -> DualConfig:
    spec = spec if spec is not None else {}
    _check_keys(spec, {"mode", "lambda0", "budget", "alpha0", "alpha_decay", "lambda_max"}, path)
    mode = _field(spec, "mode", path, kind=str, default="ascent" if "budget" in spec else "fixed")
    budget = spec.get("budget")
    return _wrap(
        path,
        DualConfig,
        mode=mode,
        lambda0=float(_number(spec, "lambda0", path, default=0.0)),
        budget=float(budget) if budget is not None else None,
        alpha0=float(_number(spec, "alpha0", path, default=0.05)),
        alpha_decay=float(_number(spec, "alpha_decay", path, default=0.0)),
        lambda_max=float(_number(spec, "lambda_max", path, default=1e6)),
    )


def _dual_echo(dual: DualConfig) -> dict:
    out = {"mode": dual.mode, "lambda0": dual.lambda0, "lambda_max": dual.lambda_max}
    if dual.mode == "ascent":
        out.update(budget=dual.budget, alpha0=dual.alpha0, alpha_decay=dual.alpha_decay)
    return out


def _resolve_importance(spec, path: str) -> ImportanceConfig:
    spec = spec if spec is not None else {}
    _check_keys(spec, {"kind", "num_samples", "shift", "scale", "mixture_subsample"}, path)
    num = spec.get("num_samples")
    sub = spec.get("mixture_subsample")
    return _wrap(
        path,
        ImportanceConfig,
        kind=_field(spec, "kind", path, kind=str, default="channel"),
        num_samples=int(num) if num is not None else None,
        shift=float(_number(spec, "shift", path, default=0.0)),
        scale=float(_number(spec, "scale", path, default=1.0)),
        mixture_subsample=int(sub) if sub is not None else None,
    )


def _importance_echo(imp: ImportanceConfig) -> dict:
    out = {"kind": imp.kind, "num_samples": imp.num_samples, "mixture_subsample": imp.mixture_subsample}
    if imp.kind == "gaussian":
        out.update(shift=imp.shift, scale=imp.scale)
    return out


def resolve_capacity(cfg: dict, seed_override=None) -> CapacityRun:
    _check_keys(cfg, {"problem", "channel", "cost", "solver", "dual", "importance"}, "config")
    problem = _field(cfg, "problem", "config", kind=str, default="capacity")
    if problem != "capacity":
        raise ConfigurationError(f"config.problem: expected 'capacity', got {problem!r}")
    channel = _resolve_channel(_field(cfg, "channel", "config", kind=dict), "config.channel")
    cost = _resolve_cost(cfg.get("cost"), "config.cost")
    solver = _resolve_solver(_field(cfg, "solver", "config", kind=dict), "config.solver", seed_override)
    dual = _resolve_dual(cfg.get("dual"), "config.dual")
    importance = _resolve_importance(cfg.get("importance"), "config.importance")
    if importance.mixture_subsample is not None and importance.mixture_subsample > solver.num_particles:
        raise ConfigurationError(
            f"config.importance.mixture_subsample: {importance.mixture_subsample} exceeds "
            f"num_particles {solver.num_particles}"
        )
    echo = {
        "problem": "capacity",
        "channel": _channel_echo(channel),
        "cost": _cost_echo(cost),
        "solver": _solver_echo(solver),
        "dual": _dual_echo(dual),
        "importance": _importance_echo(importance),
    }
    return CapacityRun(channel=channel, cost=cost, solver=solver, dual=dual, importance=importance, echo=echo)


def _resolve_source(spec, path: str) -> tuple[np.ndarray, dict]:
    if not isinstance(spec, dict):
        raise ConfigurationError(f"{path}: expected an object with a 'kind' field")
    kind = _field(spec, "kind", path, kind=str)
    if kind == "gaussian":
        _check_keys(spec, {"kind", "dim", "num_samples", "mean", "std", "seed"}, path)
        dim = int(_number(spec, "dim", path, default=1))
        num = int(_number(spec, "num_samples", path, default=4096))
        mean = float(_number(spec, "mean", path, default=0.0))
        std = float(_number(spec, "std", path, default=1.0))
        seed = int(_number(spec, "seed", path, default=0))
        if num < 1 or dim < 1:
            raise ConfigurationError(f"{path}: num_samples and dim must be >= 1")
        if not std > 0:
            raise ConfigurationError(f"{path}.std: must be > 0")
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
        samples = mean + std * rng.standard_normal((num, dim))
        echo = {"kind": "gaussian", "dim": dim, "num_samples": num, "mean": mean, "std": std, "seed": seed}
        return samples, echo
    if kind == "file":
        _check_keys(spec, {"kind", "path"}, path)
        fpath = _field(spec, "path", path, kind=str)
        try:
            samples = np.loadtxt(fpath, delimiter=",", ndmin=2)
        except OSError:
            raise ConfigurationError(f"{path}.path: cannot read {fpath!r}")
        except ValueError as exc:
            raise ConfigurationError(f"{path}.path: {fpath!r} is not numeric CSV ({exc})")
        return samples, {"kind": "file", "path": fpath}
    raise ConfigurationError(f"{path}.kind: unknown source kind {kind!r}")


def _resolve_distortion(spec, path: str):
    spec = spec if spec is not None else {"kind": "squared-error"}
    kind = _field(spec, "kind", path, kind=str, default="squared-error")
    _check_keys(spec, {"kind"}, path)
    if kind != "squared-error":
        raise ConfigurationError(f"{path}.kind: unknown distortion kind {kind!r}")
    return SquaredErrorDistortion()


def resolve_rd(cfg: dict, seed_override=None) -> RdRun:
    _check_keys(cfg, {"problem", "source", "distortion", "lambda", "solver"}, "config")
    problem = _field(cfg, "problem", "config", kind=str, default="rd")
    if problem != "rd":
        raise ConfigurationError(f"config.problem: expected 'rd', got {problem!r}")
    source, source_echo = _resolve_source(_field(cfg, "source", "config", kind=dict), "config.source")
    distortion = _resolve_distortion(cfg.get("distortion"), "config.distortion")
    lam = float(_number(cfg, "lambda", "config"))
    solver = _resolve_solver(cfg.get("solver"), "config.solver", seed_override, default_particles=64)
    rd_problem = _wrap("config", RDProblem, source=source, distortion=distortion, lam=lam)
    echo = {
        "problem": "rd",
        "source": source_echo,
        "distortion": {"kind": "squared-error"},
        "lambda": lam,
        "solver": _solver_echo(solver),
    }
    return RdRun(problem=rd_problem, solver=solver, echo=echo)


def _resolve_grid(spec, path: str, tails_allowed: bool) -> np.ndarray:
    _check_keys(spec, {"lo", "hi", "num", "tails"} if tails_allowed else {"lo", "hi", "num"}, path)
    lo = float(_number(spec, "lo", path))
    hi = float(_number(spec, "hi", path))
    num = int(_number(spec, "num", path))
    if not (hi > lo and num >= 2):
        raise ConfigurationError(f"{path}: need hi > lo and num >= 2")
    grid = np.linspace(lo, hi, num)
    if tails_allowed and bool(spec.get("tails", False)):
        grid = np.concatenate([[-np.inf], grid, [np.inf]])
    return grid


def _resolve_discrete_channel(spec, path: str) -> tuple[DiscreteChannel, dict]:
    if not isinstance(spec, dict):
        raise ConfigurationError(f"{path}: expected an object")
    ways = [k for k in ("matrix", "matrix_file", "quantize") if k in spec]
    if len(ways) != 1:
        raise ConfigurationError(f"{path}: give exactly one of 'matrix', 'matrix_file', 'quantize'")
    if "matrix" in spec:
        _check_keys(spec, {"matrix", "inputs", "costs"}, path)
        matrix = np.asarray(_field(spec, "matrix", path, kind=list), dtype=np.float64)
        inputs = spec.get("inputs")
        costs = spec.get("costs")
        chan = _wrap(
            path,
            DiscreteChannel,
            matrix=matrix,
            inputs=np.asarray(inputs, dtype=np.float64) if inputs is not None else None,
            costs=np.asarray(costs, dtype=np.float64) if costs is not None else None,
        )
        return chan, {"matrix": chan.matrix.tolist(), "inputs": chan.inputs.tolist(), "costs": chan.costs.tolist()}
    if "matrix_file" in spec:
        _check_keys(spec, {"matrix_file", "cost_file"}, path)
        mpath = _field(spec, "matrix_file", path, kind=str)
        try:
            matrix = np.loadtxt(mpath, delimiter=",", ndmin=2)
        except OSError:
            raise ConfigurationError(f"{path}.matrix_file: cannot read {mpath!r}")
        except ValueError as exc:
            raise ConfigurationError(f"{path}.matrix_file: {mpath!r} is not numeric CSV ({exc})")
        costs = None
        if "cost_file" in spec:
            cpath = _field(spec, "cost_file", path, kind=str)
            try:
                costs = np.loadtxt(cpath, delimiter=",", ndmin=1)
            except OSError:
                raise ConfigurationError(f"{path}.cost_file: cannot read {cpath!r}")
            except ValueError as exc:
                raise ConfigurationError(f"{path}.cost_file: {cpath!r} is not numeric CSV ({exc})")
        chan = _wrap(path, DiscreteChannel, matrix=matrix, costs=costs)
        echo = {"matrix_file": mpath}
        if "cost_file" in spec:
            echo["cost_file"] = spec["cost_file"]
        return chan, echo
    q = _field(spec, "quantize", path, kind=dict)
    _check_keys(spec, {"quantize"}, path)
    _check_keys(q, {"channel", "input_grid", "output_edges", "cost", "min_coverage"}, f"{path}.quantize")
    channel = _resolve_channel(_field(q, "channel", f"{path}.quantize", kind=dict), f"{path}.quantize.channel")
    grid = _resolve_grid(_field(q, "input_grid", f"{path}.quantize", kind=dict), f"{path}.quantize.input_grid", False)
    edges = _resolve_grid(
        _field(q, "output_edges", f"{path}.quantize", kind=dict), f"{path}.quantize.output_edges", True
    )
    cost = _resolve_cost(q.get("cost"), f"{path}.quantize.cost")
    coverage = float(_number(q, "min_coverage", f"{path}.quantize", default=0.9999))
    chan = _wrap(path, quantize_channel, channel, grid, edges, cost, min_coverage=coverage)
    echo = {
        "quantize": {
            "channel": _channel_echo(channel),
            "input_grid": dict(q["input_grid"]),
            "output_edges": dict(q["output_edges"]),
            "cost": _cost_echo(cost),
            "min_coverage": coverage,
        }
    }
    return chan, echo


def resolve_ba(cfg: dict) -> BaRun:
    _check_keys(cfg, {"problem", "channel", "lambda", "lambdas", "budget", "tau", "tol", "max_iters"}, "config")
    problem = _field(cfg, "problem", "config", kind=str, default="ba")
    if problem != "ba":
        raise ConfigurationError(f"config.problem: expected 'ba', got {problem!r}")
    channel, channel_echo = _resolve_discrete_channel(_field(cfg, "channel", "config", kind=dict), "config.channel")
    picked = [k for k in ("lambda", "lambdas", "budget") if k in cfg]
    if len(picked) > 1:
        raise ConfigurationError("config: give at most one of 'lambda', 'lambdas', 'budget'")
    lams = None
    budget = None
    if "lambdas" in cfg:
        vals = _field(cfg, "lambdas", "config", kind=list)
        if not vals:
            raise ConfigurationError("config.lambdas: must be a non-empty list")
        lams = [float(v) for v in vals]
        if any(not (v >= 0 and math.isfinite(v)) for v in lams):
            raise ConfigurationError("config.lambdas: entries must be finite and >= 0")
    elif "budget" in cfg:
        budget = float(_number(cfg, "budget", "config"))
        if not (budget > 0 and math.isfinite(budget)):
            raise ConfigurationError(f"config.budget: must be positive and finite, got {budget}")
    else:
        lams = [float(_number(cfg, "lambda", "config", default=0.0))]
        if not (lams[0] >= 0 and math.isfinite(lams[0])):
            raise ConfigurationError(f"config.lambda: must be finite and >= 0, got {lams[0]}")
    tau = float(_number(cfg, "tau", "config", default=1.0))
    tol = float(_number(cfg, "tol", "config", default=1e-10))
    max_iters = int(_number(cfg, "max_iters", "config", default=20000))
    if not (tau > 0 and math.isfinite(tau)):
        raise ConfigurationError(f"config.tau: must be positive and finite, got {tau}")
    if not (tol > 0 and max_iters >= 1):
        raise ConfigurationError("config: need tol > 0 and max_iters >= 1")
    echo = {"problem": "ba", "channel": channel_echo, "tau": tau, "tol": tol, "max_iters": max_iters}
    if budget is not None:
        echo["budget"] = budget
    elif len(lams) > 1:
        echo["lambdas"] = lams
    else:
        echo["lambda"] = lams[0]
    return BaRun(channel=channel, lams=lams, budget=budget, tau=tau, tol=tol, max_iters=max_iters, echo=echo)


def resolve_sweep(cfg: dict, seed_override=None) -> SweepRun:
    _check_keys(cfg, {"problem", "param", "values", "base"}, "config")
    problem = _field(cfg, "problem", "config", kind=str, default="sweep")
    if problem != "sweep":
        raise ConfigurationError(f"config.problem: expected 'sweep', got {problem!r}")
    param = _field(cfg, "param", "config", kind=str)
    if param not in ("budget", "lambda"):
        raise ConfigurationError(f"config.param: expected 'budget' or 'lambda', got {param!r}")
    values = _field(cfg, "values", "config", kind=list)
    if not values:
        raise ConfigurationError("config.values: must be a non-empty list")
    values = [float(v) for v in values]
    base = dict(_field(cfg, "base", "config", kind=dict))
    base.setdefault("problem", "capacity")
    # validate every grid point up front so a bad one fails before any run starts
    resolved = [apply_sweep_value(base, param, v, seed_override) for v in values]
    echo = {"problem": "sweep", "param": param, "values": values, "base": resolved[0].echo}
    return SweepRun(param=param, values=values, base=base, echo=echo)


def apply_sweep_value(base: dict, param: str, value: float, seed_override=None) -> CapacityRun:
    """Materialize one sweep grid point as a capacity run."""
    cfg = json.loads(json.dumps(base))  # deep copy, JSON types only
    dual = cfg.setdefault("dual", {})
    if param == "budget":
        dual["mode"] = "ascent"
        dual["budget"] = value
    else:
        dual["mode"] = "fixed"
        dual["lambda0"] = value
        dual.pop("budget", None)
        dual.pop("alpha0", None)
        dual.pop("alpha_decay", None)
    return resolve_capacity(cfg, seed_override)
