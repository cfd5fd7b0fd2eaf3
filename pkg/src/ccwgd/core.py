"""Shared domain types for the particle solvers.

Everything downstream works on three abstractions: an empirical input measure
stored as a plain array of particle locations (ParticleSet), a channel given by
its conditional log-density (ChannelModel), and a differentiable input cost
(CostModel).  Run parameters live in small frozen dataclasses so that a fully
resolved configuration can be echoed verbatim into result files and fed back in
to reproduce a run bit for bit.
"""

import abc
import math
import re
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LOG_2PI",
    "ConfigurationError",
    "ParticleSet",
    "ChannelModel",
    "CostModel",
    "QuadraticCost",
    "GaussianInit",
    "PointInit",
    "StepSchedule",
    "SolverConfig",
    "DualConfig",
    "IterationRecord",
    "init_particles",
    "save_particles",
    "load_particles",
]

LOG_2PI = math.log(2.0 * math.pi)


class ConfigurationError(ValueError):
    """A run configuration failed validation."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, order="C")
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ParticleSet:
    """Uniform empirical measure (1/N) sum_i delta_{x_i} stored as an N x n array.

    Weights are implicit and equal; moving mass means moving rows.  The array is
    frozen after validation so a set can be shared between iterations safely.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            # a bare vector is read as N scalar particles
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"particle array must be (N, n) with N >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("particle array contains non-finite entries")
        object.__setattr__(self, "points", _readonly(pts))

    @property
    def num_particles(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def with_points(self, points: np.ndarray) -> "ParticleSet":
        return ParticleSet(points)


class ChannelModel(abc.ABC):
    """Memoryless channel given by a conditional density p(y|x) on R^m, x in R^n.

    All methods broadcast over leading axes: x has trailing shape (n,), y has
    trailing shape (m,), and the non-trailing parts broadcast together.  The
    density must be strictly positive on all of R^m so log_pdf is finite for
    finite arguments.
    """

    input_dim: int
    output_dim: int

    @abc.abstractmethod
    def log_pdf(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """log p(y|x), shape = broadcast of the leading axes."""

    @abc.abstractmethod
    def grad_x_log_pdf(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """d/dx log p(y|x), trailing shape (n,)."""

    @abc.abstractmethod
    def sample_output(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Draw y ~ p(.|x) for each leading entry of x, trailing shape (m,)."""


class CostModel(abc.ABC):
    """Differentiable per-symbol input cost b(x) >= 0 with b -> inf as |x| -> inf."""

    @abc.abstractmethod
    def cost(self, x: np.ndarray) -> np.ndarray:
        """b(x) for x with trailing shape (n,); returns the leading shape."""

    @abc.abstractmethod
    def grad_cost(self, x: np.ndarray) -> np.ndarray:
        """d/dx b(x), same shape as x."""


class QuadraticCost(CostModel):
    """b(x) = weight * ||x||^2, the usual average-power constraint."""

    def __init__(self, weight: float = 1.0):
        if not (weight > 0 and math.isfinite(weight)):
            raise ConfigurationError(f"cost weight must be positive and finite, got {weight}")
        self.weight = float(weight)

    def cost(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.weight * np.sum(x * x, axis=-1)

    def grad_cost(self, x):
        x = np.asarray(x, dtype=np.float64)
        return (2.0 * self.weight) * x


@dataclass(frozen=True)
class GaussianInit:
    """Gaussian initial measure N(mean, cov) in R^dim.

    cov may be a scalar variance, a length-dim vector of variances, or a full
    (dim, dim) covariance matrix.  Non-PSD covariance is a configuration error.
    """

    dim: int
    mean: float | np.ndarray = 0.0
    cov: float | np.ndarray = 1.0

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ConfigurationError(f"init dim must be >= 1, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    def _mean_vector(self) -> np.ndarray:
        m = np.asarray(self.mean, dtype=np.float64)
        if m.ndim == 0:
            m = np.full(self.dim, float(m))
        if m.shape != (self.dim,):
            raise ConfigurationError(f"init mean must be scalar or shape ({self.dim},), got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ConfigurationError("init mean contains non-finite entries")
        return m

    def _cov_factor(self) -> np.ndarray:
        """A matrix L with L L^T = cov; raises on non-PSD input."""
        c = np.asarray(self.cov, dtype=np.float64)
        if c.ndim == 0:
            c = np.full(self.dim, float(c))
        if c.ndim == 1:
            if c.shape != (self.dim,):
                raise ConfigurationError(f"init variance vector must have shape ({self.dim},), got {c.shape}")
            if not np.all(np.isfinite(c)) or np.any(c < 0):
                raise ConfigurationError("init variances must be finite and >= 0")
            return np.diag(np.sqrt(c))
        if c.shape != (self.dim, self.dim) or not np.all(np.isfinite(c)):
            raise ConfigurationError(f"init covariance must be a finite ({self.dim}, {self.dim}) matrix")
        if not np.allclose(c, c.T, atol=1e-12):
            raise ConfigurationError("init covariance must be symmetric")
        w, v = np.linalg.eigh(c)
        if w.min(initial=0.0) < -1e-10 * max(w.max(initial=0.0), 1.0):
            raise ConfigurationError(f"init covariance is not positive semidefinite (min eigenvalue {w.min():g})")
        return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class PointInit:
    """Explicit list of starting particle locations."""

    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", _readonly(np.atleast_2d(np.asarray(self.points, dtype=np.float64))))


@dataclass(frozen=True)
class StepSchedule:
    """Transport step-size rule tau_k, indexed from k = 1.

    kinds:
      constant    tau_k = tau0
      polynomial  tau_k = tau0 / k**decay with decay in (0.5, 1], so the steps
                  are square-summable but not summable
      adaptive    per-coordinate moment-scaled direction with base rate tau0;
                  opts out of the square-summable guarantee, off by default
    """

    kind: str = "polynomial"
    tau0: float = 0.1
    decay: float = 0.7
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("constant", "polynomial", "adaptive"):
            raise ConfigurationError(f"unknown step schedule kind {self.kind!r}")
        if not (self.tau0 > 0 and math.isfinite(self.tau0)):
            raise ConfigurationError(f"tau0 must be positive and finite, got {self.tau0}")
        if self.kind == "polynomial" and not (0.5 < self.decay <= 1.0):
            raise ConfigurationError(f"polynomial decay must lie in (0.5, 1], got {self.decay}")
        if self.kind == "adaptive":
            if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
                raise ConfigurationError("adaptive betas must lie in [0, 1)")
            if not self.eps > 0:
                raise ConfigurationError("adaptive eps must be positive")

    def step_size(self, k: int) -> float:
        if k < 1:
            raise ValueError(f"step index is 1-based, got {k}")
        if self.kind == "polynomial":
            return self.tau0 / float(k) ** self.decay
        return self.tau0


@dataclass(frozen=True)
class SolverConfig:
    """Particle solver parameters shared by the capacity and RD drivers."""

    num_particles: int
    is_samples: int = 256
    max_iters: int = 1000
    step: StepSchedule = field(default_factory=StepSchedule)
    init: GaussianInit | PointInit | None = None
    seed: int = 0
    grad_tol: float = 1e-4
    trace_stride: int = 1

    def __post_init__(self):
        if self.num_particles < 1:
            raise ConfigurationError(f"num_particles must be >= 1, got {self.num_particles}")
        if self.is_samples < 1:
            raise ConfigurationError(f"is_samples must be >= 1, got {self.is_samples}")
        if self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not isinstance(self.step, StepSchedule):
            raise ConfigurationError("step must be a StepSchedule")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be a non-negative integer, got {self.seed}")
        if not (self.grad_tol >= 0 and math.isfinite(self.grad_tol)):
            raise ConfigurationError(f"grad_tol must be finite and >= 0, got {self.grad_tol}")
        if self.trace_stride < 1:
            raise ConfigurationError(f"trace_stride must be >= 1, got {self.trace_stride}")


@dataclass(frozen=True)
class DualConfig:
    """Multiplier handling: a fixed slope or projected ascent toward a budget.

    In ascent mode the multiplier moves by alpha_k * (B_hat - budget) and is
    clipped at zero; alpha_k = alpha0 / k**alpha_decay.  lambda_max bounds the
    multiplier before the run is declared stalled (an infeasible budget makes
    it grow without bound).
    """

    mode: str = "fixed"
    lambda0: float = 0.0
    budget: float | None = None
    alpha0: float = 0.05
    alpha_decay: float = 0.0
    lambda_max: float = 1e6

    def __post_init__(self):
        if self.mode not in ("fixed", "ascent"):
            raise ConfigurationError(f"dual mode must be 'fixed' or 'ascent', got {self.mode!r}")
        if not (self.lambda0 >= 0 and math.isfinite(self.lambda0)):
            raise ConfigurationError(f"lambda0 must be finite and >= 0, got {self.lambda0}")
        if self.mode == "ascent":
            if self.budget is None or not math.isfinite(self.budget):
                raise ConfigurationError("ascent mode requires a finite budget")
            if not (self.alpha0 > 0 and math.isfinite(self.alpha0)):
                raise ConfigurationError(f"alpha0 must be positive and finite, got {self.alpha0}")
            if self.alpha_decay < 0:
                raise ConfigurationError(f"alpha_decay must be >= 0, got {self.alpha_decay}")
        if not self.lambda_max > 0:
            raise ConfigurationError(f"lambda_max must be positive, got {self.lambda_max}")

    def dual_step_size(self, k: int) -> float:
        if self.alpha_decay == 0.0:
            return self.alpha0
        return self.alpha0 / float(k) ** self.alpha_decay


@dataclass(frozen=True)
class IterationRecord:
    """One trace row: estimates evaluated on the pre-transport particles."""

    iteration: int
    lam: float
    lagrangian: float
    rate: float
    cost: float
    grad_norm: float
    w2_step: float

    def __post_init__(self):
        vals = (self.lam, self.lagrangian, self.rate, self.cost, self.grad_norm, self.w2_step)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"iteration {self.iteration}: non-finite trace entry {vals}")
        if self.cost < 0 or self.grad_norm < 0:
            raise ValueError(f"iteration {self.iteration}: cost and grad_norm must be >= 0")


def init_particles(config: SolverConfig, rng: np.random.Generator) -> ParticleSet:
    """Draw the starting particle set from the configured initial measure."""
    init = config.init
    if init is None:
        raise ConfigurationError("initial measure is unresolved; set SolverConfig.init")
    if isinstance(init, PointInit):
        pts = np.array(init.points)
        if pts.shape[0] != config.num_particles:
            raise ConfigurationError(
                f"explicit init has {pts.shape[0]} points but num_particles = {config.num_particles}"
            )
        return ParticleSet(pts)
    if isinstance(init, GaussianInit):
        mean = init._mean_vector()
        factor = init._cov_factor()
        z = rng.standard_normal((config.num_particles, init.dim))
        return ParticleSet(mean + z @ factor.T)
    raise ConfigurationError(f"unknown init spec {type(init).__name__}")


_META_RE = re.compile(r"#\s*n=(\d+)\s+N=(\d+)\s+seed=(\d+)\s*$")


def save_particles(path, particles: ParticleSet, seed: int = 0) -> None:
    """Write one particle per row (columns x_1..x_n) under a single meta comment.

    Values are formatted with %.17g so a load round-trips bit for bit.
    """
    pts = particles.points
    with open(path, "w", newline="") as fh:
        fh.write(f"# n={particles.dim} N={particles.num_particles} seed={int(seed)}\n")
        for row in pts:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_particles(path) -> tuple[ParticleSet, dict]:
    """Inverse of save_particles; returns the set and the parsed meta line."""
    with open(path, "r") as fh:
        header = fh.readline().strip()
        m = _META_RE.match(header)
        if m is None:
            raise ValueError(f"{path}: missing '# n=<n> N=<N> seed=<seed>' meta line")
        meta = {"n": int(m.group(1)), "N": int(m.group(2)), "seed": int(m.group(3))}
        rows = [[float(tok) for tok in line.split(",")] for line in fh if line.strip()]
    pts = np.asarray(rows, dtype=np.float64)
    if pts.shape != (meta["N"], meta["n"]):
        raise ValueError(f"{path}: data shape {pts.shape} disagrees with meta {meta}")
    return ParticleSet(pts), meta
