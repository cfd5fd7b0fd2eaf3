"""Rate-distortion by particle descent on the reconstruction measure.

The source is a fixed sample cloud; the reconstruction measure is a particle
set moved by the gradient of the slope-lam rate functional's first variation,

    grad(y) = lam * (1/N_x) sum_x grad_y d(x, y) * exp(-lam d(x, y)) / Z(x),
    Z(x) = (1/N) sum_j exp(-lam d(x, y_j)),

with all Z arithmetic in log space.  After the descent, the implied test
channel pi(j|i) proportional to exp(-lam d_ij) gives the operating point

    D_hat = mean_i sum_j pi(j|i) d_ij,
    R_hat = mean_i(-log Z(x_i)) - lam * D_hat,

which is a KL divergence and therefore non-negative.
"""

import abc
import collections
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import ConfigurationError, GaussianInit, ParticleSet, SolverConfig, init_particles
from .estimator import _log_mean_exp
from .wgd import _STOP_WINDOW, SolveAbort, transport_step

__all__ = [
    "DistortionModel",
    "SquaredErrorDistortion",
    "RDProblem",
    "RDIterationRecord",
    "RDResult",
    "rd_first_variation_grad",
    "rd_readout",
    "rd_solve",
]

log = logging.getLogger(__name__)


class DistortionModel(abc.ABC):
    """Pairwise distortion d(x, y) >= 0, differentiable in the reconstruction."""

    @abc.abstractmethod
    def distortion(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """d(x, y) for trailing-dim vectors, broadcasting over leading axes."""

    @abc.abstractmethod
    def grad_y_distortion(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """d/dy d(x, y), trailing shape (n,)."""


class SquaredErrorDistortion(DistortionModel):
    """d(x, y) = ||x - y||^2."""

    def distortion(self, x, y):
        r = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
        return np.sum(r * r, axis=-1)

    def grad_y_distortion(self, x, y):
        return 2.0 * (np.asarray(y, dtype=np.float64) - np.asarray(x, dtype=np.float64))


@dataclass(frozen=True)
class RDProblem:
    """Source sample cloud plus distortion and slope."""

    source: np.ndarray
    distortion: DistortionModel
    lam: float

    def __post_init__(self):
        src = np.array(np.asarray(self.source, dtype=np.float64), order="C")
        if src.ndim == 1:
            src = src[:, None]
        if src.ndim != 2 or src.shape[0] < 1:
            raise ConfigurationError(f"source must be (N_x, n) samples, got shape {src.shape}")
        if not np.all(np.isfinite(src)):
            raise ConfigurationError("source samples contain non-finite entries")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ConfigurationError(f"slope lam must be finite and >= 0, got {self.lam}")
        src.flags.writeable = False
        object.__setattr__(self, "source", src)

    @property
    def dim(self) -> int:
        return self.source.shape[1]


@dataclass(frozen=True)
class RDIterationRecord:
    iteration: int
    lam: float
    rate: float
    distortion: float
    grad_norm: float

    def __post_init__(self):
        vals = (self.lam, self.rate, self.distortion, self.grad_norm)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"iteration {self.iteration}: non-finite trace entry {vals}")


@dataclass(frozen=True)
class RDResult:
    particles: ParticleSet
    trace: list
    rate: float
    distortion: float
    stop_reason: str
    iterations: int


def _neg_lam_dist(problem: RDProblem, recon_points: np.ndarray) -> np.ndarray:
    """-lam * d(x_i, y_j) for all source/recon pairs, shape (N_x, N)."""
    d = problem.distortion.distortion(problem.source[:, None, :], recon_points[None, :, :])
    return -problem.lam * d


def rd_first_variation_grad(y: np.ndarray, problem: RDProblem, recon: ParticleSet) -> np.ndarray:
    """Descent gradient of the rate functional at reconstruction point(s) y.

    y may be one point (n,) or a batch (B, n); the result matches.  Raises if
    some source point is infinitely far from every recon particle (its
    partition value underflows to zero), since the weights are then undefined.
    """
    single = np.asarray(y).ndim == 1
    pts = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if pts.shape[1] != problem.dim:
        raise ValueError(f"points have dim {pts.shape[1]}, source has dim {problem.dim}")
    log_z = _log_mean_exp(_neg_lam_dist(problem, recon.points), axis=1)  # (N_x,)
    if not np.all(np.isfinite(log_z)):
        bad = int(np.flatnonzero(~np.isfinite(log_z))[0])
        raise FloatingPointError(
            f"partition value underflowed for source index {bad}; recon set too far or lam too large"
        )
    a = -problem.lam * problem.distortion.distortion(problem.source[:, None, :], pts[None, :, :])
    g = problem.distortion.grad_y_distortion(problem.source[:, None, :], pts[None, :, :])
    w = np.exp(a - log_z[:, None])  # (N_x, B)
    grad = problem.lam * np.mean(w[:, :, None] * g, axis=0)
    return grad[0] if single else grad


def rd_readout(problem: RDProblem, recon: ParticleSet) -> tuple[float, float]:
    """(R_hat, D_hat) of the test channel implied by the recon particles."""
    d = problem.distortion.distortion(problem.source[:, None, :], recon.points[None, :, :])  # (N_x, N)
    a = -problem.lam * d
    log_z = _log_mean_exp(a, axis=1)
    if not np.all(np.isfinite(log_z)):
        bad = int(np.flatnonzero(~np.isfinite(log_z))[0])
        raise FloatingPointError(f"partition value underflowed for source index {bad}")
    pi = np.exp(a - log_z[:, None]) / recon.num_particles  # rows sum to 1
    d_hat = float(np.mean(np.sum(pi * d, axis=1)))
    r_hat = float(np.mean(-log_z)) - problem.lam * d_hat
    # the identity makes this a KL divergence; clip the ~1e-17 fp negatives
    return max(r_hat, 0.0), d_hat


def rd_solve(problem: RDProblem, solver: SolverConfig, trace_writer=None) -> RDResult:
    """Descend the reconstruction particles and read out the (R, D) point.

    The gradient is a deterministic function of the particle state (no
    sampling), so the only randomness is the init draw under solver.seed.
    Stopping mirrors the capacity solver: trailing window of grad_norm under
    grad_tol, else max_iters.
    """
    solver_cfg = solver if solver.init is not None else replace(solver, init=GaussianInit(dim=problem.dim))
    recon = init_particles(solver_cfg, np.random.default_rng(np.random.SeedSequence((solver_cfg.seed, 0))))
    if recon.dim != problem.dim:
        raise ConfigurationError(f"recon dim {recon.dim} != source dim {problem.dim}")

    trace: list[RDIterationRecord] = []
    grad_window = collections.deque(maxlen=_STOP_WINDOW)
    stop_reason = "max_iters"
    stop_iteration = solver_cfg.max_iters

    def record(rec):
        trace.append(rec)
        if trace_writer is not None:
            trace_writer(rec)

    for k in range(1, solver_cfg.max_iters + 1):
        try:
            grads = rd_first_variation_grad(recon.points, problem, recon)
            rate, dist = rd_readout(problem, recon)
        except FloatingPointError as exc:
            raise SolveAbort(str(exc), k, trace) from exc
        grad_norm = float(np.mean(np.sum(grads * grads, axis=-1)))
        rec = RDIterationRecord(iteration=k, lam=problem.lam, rate=rate, distortion=dist, grad_norm=grad_norm)
        if k == 1 or k % solver_cfg.trace_stride == 0:
            record(rec)
        grad_window.append(grad_norm)
        if len(grad_window) == _STOP_WINDOW and float(np.mean(grad_window)) < solver_cfg.grad_tol:
            stop_reason, stop_iteration = "grad_tol", k
            if trace and trace[-1].iteration != k:
                record(rec)
            break
        recon = transport_step(recon, grads, solver_cfg.step.step_size(k))

    try:
        rate, dist = rd_readout(problem, recon)
    except FloatingPointError as exc:
        raise SolveAbort(f"final readout failed: {exc}", stop_iteration, trace) from exc
    log.info("rd stop (%s) after %d iterations: R_hat=%.6g D_hat=%.6g", stop_reason, stop_iteration, rate, dist)
    return RDResult(
        particles=recon,
        trace=trace,
        rate=rate,
        distortion=dist,
        stop_reason=stop_reason,
        iterations=stop_iteration,
    )
