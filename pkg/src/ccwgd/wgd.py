"""Particle gradient descent on the capacity-cost Lagrangian.

The loop alternates three moves.  Each iteration k first estimates, for every
particle, the potential and its gradient against the output mixture of the
current set (importance sampling, see the estimator module).  It then pushes
every particle by an explicit Euler step x <- x - tau_k * grad, which is the
discrete-time gradient flow of the Lagrangian in the Wasserstein geometry; the
squared transport cost of that step is exactly tau_k^2 times the mean squared
gradient norm, which the trace records as w2_step.  In ascent mode the
multiplier then takes a projected subgradient step lam <- max(0, lam +
alpha_k (B_hat - budget)) toward the cost constraint.

Stopping: the run ends when the trailing window (width 50) of the mean squared
gradient norm falls below grad_tol, when the multiplier blows past lambda_max
(infeasible budget, reported as "stalled"), or at max_iters.  Final objective
values are recomputed on the final particle set with fresh sample streams.
"""

import collections
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    ChannelModel,
    ConfigurationError,
    CostModel,
    DualConfig,
    GaussianInit,
    IterationRecord,
    ParticleSet,
    SolverConfig,
    StepSchedule,
    init_particles,
)
from .estimator import (
    EstimatorError,
    ImportanceConfig,
    Objectives,
    estimate_potential_batch,
    objective_summaries,
    particle_rngs,
)

__all__ = [
    "StepSchedule",
    "NonFiniteGradientError",
    "SolveAbort",
    "SolveResult",
    "StationaritySummary",
    "transport_step",
    "dual_update",
    "solve",
    "stationarity_diagnostic",
]

log = logging.getLogger(__name__)

_STOP_WINDOW = 50


class NonFiniteGradientError(RuntimeError):
    """A transport step received a non-finite gradient row."""

    def __init__(self, particle_index: int):
        super().__init__(f"non-finite gradient for particle index {particle_index}")
        self.particle_index = int(particle_index)


class SolveAbort(RuntimeError):
    """Numerical failure mid-run; carries the partial trace for post-mortems."""

    def __init__(self, message: str, iteration: int, trace: list):
        super().__init__(f"aborted at iteration {iteration}: {message}")
        self.iteration = int(iteration)
        self.trace = list(trace)


@dataclass(frozen=True)
class SolveResult:
    particles: ParticleSet
    trace: list
    lam: float
    lagrangian: float
    rate: float
    cost: float
    grad_norm: float
    stop_reason: str
    iterations: int


@dataclass(frozen=True)
class StationaritySummary:
    """Trailing-window stationarity readout of a finished trace."""

    trailing_grad_norm: float
    trailing_w2_step: float
    decay_ratio: float
    converged: bool


def transport_step(particles: ParticleSet, grads: np.ndarray, step_size: float) -> ParticleSet:
    """Push every particle by -step_size * grad (explicit Euler on the flow).

    step_size = 0 returns the input set unchanged, bit for bit.
    """
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != particles.points.shape:
        raise ValueError(f"gradient shape {grads.shape} != particle shape {particles.points.shape}")
    finite = np.all(np.isfinite(grads), axis=-1)
    if not finite.all():
        raise NonFiniteGradientError(int(np.flatnonzero(~finite)[0]))
    if not (step_size >= 0 and math.isfinite(step_size)):
        raise ValueError(f"step size must be finite and >= 0, got {step_size}")
    if step_size == 0.0:
        return particles
    return ParticleSet(particles.points - step_size * grads)


def dual_update(lam: float, cost_value: float, budget: float, step_size: float) -> float:
    """Projected ascent step on the multiplier; never leaves [0, inf)."""
    return max(0.0, lam + step_size * (cost_value - budget))


def _resolve_init(solver: SolverConfig, dual: DualConfig, dim: int) -> SolverConfig:
    if solver.init is not None:
        return solver
    # default start: isotropic Gaussian whose expected quadratic cost meets the
    # budget when one is given, unit variance otherwise
    var = 1.0
    if dual.mode == "ascent" and dual.budget is not None and dual.budget > 0:
        var = dual.budget / dim
    return replace(solver, init=GaussianInit(dim=dim, mean=0.0, cov=var))


def solve(
    channel: ChannelModel,
    cost: CostModel,
    solver: SolverConfig,
    dual: DualConfig | None = None,
    importance: ImportanceConfig | None = None,
    trace_writer=None,
) -> SolveResult:
    """Run the full descent/ascent loop and return the final estimates.

    trace_writer, when given, is called with each recorded IterationRecord as
    it is produced, so a caller can stream the trace to disk and keep the rows
    written so far if the run aborts.  Reruns with identical configuration are
    bit-identical: all randomness flows through per-particle streams keyed by
    (seed, iteration, particle index).
    """
    dual = dual if dual is not None else DualConfig()
    importance = importance if importance is not None else ImportanceConfig()
    solver = _resolve_init(solver, dual, channel.input_dim)
    num_samples = importance.resolved_samples(solver.is_samples)
    sub = importance.mixture_subsample
    if sub is not None and sub > solver.num_particles:
        raise ConfigurationError(
            f"mixture_subsample {sub} exceeds num_particles {solver.num_particles}"
        )

    seed = solver.seed
    particles = init_particles(solver, np.random.default_rng(np.random.SeedSequence((seed, 0))))
    if particles.dim != channel.input_dim:
        raise ConfigurationError(f"init dim {particles.dim} != channel input dim {channel.input_dim}")
    n_particles = particles.num_particles
    lam = dual.lambda0
    schedule = solver.step
    adaptive = schedule.kind == "adaptive"
    moment1 = np.zeros_like(particles.points)
    moment2 = np.zeros_like(particles.points)

    trace: list[IterationRecord] = []
    grad_window = collections.deque(maxlen=_STOP_WINDOW)
    stop_reason = "max_iters"
    stop_iteration = solver.max_iters

    def record(rec: IterationRecord):
        trace.append(rec)
        if trace_writer is not None:
            trace_writer(rec)

    for k in range(1, solver.max_iters + 1):
        rngs = particle_rngs(seed, k, n_particles)
        prev = particles
        if sub is not None and sub < n_particles:
            # the subsample stream sits one index past the particle streams
            pick_rng = np.random.default_rng(np.random.SeedSequence((seed, k, n_particles)))
            prev = ParticleSet(particles.points[pick_rng.choice(n_particles, size=sub, replace=False)])
        try:
            values, grads = estimate_potential_batch(
                particles.points, prev, channel, cost, lam, importance, num_samples, rngs
            )
        except EstimatorError as exc:
            raise SolveAbort(str(exc), k, trace) from exc
        summ = objective_summaries(values, grads, cost.cost(particles.points), lam)
        tau = schedule.step_size(k)
        try:
            rec = IterationRecord(
                iteration=k,
                lam=lam,
                lagrangian=summ.lagrangian,
                rate=summ.rate,
                cost=summ.cost,
                grad_norm=summ.grad_norm,
                w2_step=tau * tau * summ.grad_norm,
            )
        except ValueError as exc:
            raise SolveAbort(str(exc), k, trace) from exc
        if k == 1 or k % solver.trace_stride == 0:
            record(rec)
        if k % 200 == 0:
            log.info(
                "iter %d: lam=%.4g R_hat=%.4g B_hat=%.4g grad_norm=%.3g",
                k, lam, summ.rate, summ.cost, summ.grad_norm,
            )
        grad_window.append(summ.grad_norm)
        if len(grad_window) == _STOP_WINDOW and float(np.mean(grad_window)) < solver.grad_tol:
            stop_reason, stop_iteration = "grad_tol", k
            if trace and trace[-1].iteration != k:
                record(rec)
            break

        direction = grads
        if adaptive:
            moment1 = schedule.beta1 * moment1 + (1.0 - schedule.beta1) * grads
            moment2 = schedule.beta2 * moment2 + (1.0 - schedule.beta2) * grads * grads
            m_hat = moment1 / (1.0 - schedule.beta1**k)
            v_hat = moment2 / (1.0 - schedule.beta2**k)
            direction = m_hat / (np.sqrt(v_hat) + schedule.eps)
        try:
            particles = transport_step(particles, direction, tau)
        except NonFiniteGradientError as exc:
            raise SolveAbort(str(exc), k, trace) from exc

        if dual.mode == "ascent":
            lam = dual_update(lam, summ.cost, dual.budget, dual.dual_step_size(k))
            if lam > dual.lambda_max:
                stop_reason, stop_iteration = "stalled", k
                if trace and trace[-1].iteration != k:
                    record(rec)
                break

    final_rngs = particle_rngs(seed, stop_iteration + 1, n_particles)
    try:
        values, grads = estimate_potential_batch(
            particles.points, particles, channel, cost, lam, importance, num_samples, final_rngs
        )
    except EstimatorError as exc:
        raise SolveAbort(f"final evaluation failed: {exc}", stop_iteration, trace) from exc
    final = objective_summaries(values, grads, cost.cost(particles.points), lam)
    log.info("stop (%s) after %d iterations: R_hat=%.6g B_hat=%.6g", stop_reason, stop_iteration, final.rate, final.cost)
    return SolveResult(
        particles=particles,
        trace=trace,
        lam=lam,
        lagrangian=final.lagrangian,
        rate=final.rate,
        cost=final.cost,
        grad_norm=final.grad_norm,
        stop_reason=stop_reason,
        iterations=stop_iteration,
    )


def stationarity_diagnostic(trace) -> StationaritySummary:
    """Trailing stationarity check on a recorded trace.

    Reports trailing-window means of grad_norm and w2_step, plus the ratio of
    the second-half mean gradient norm to the first-half mean.  A ratio >= 1
    (no decay trend over the run's back half) flags non-convergence; an
    identically zero trailing gradient always counts as converged.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    grad = np.array([r.grad_norm for r in trace])
    w2 = np.array([r.w2_step for r in trace])
    window = min(_STOP_WINDOW, len(trace))
    trailing_grad = float(np.mean(grad[-window:]))
    trailing_w2 = float(np.mean(w2[-window:]))
    half = len(trace) // 2
    if half >= 2:
        first = float(np.mean(grad[:half]))
        second = float(np.mean(grad[half:]))
        ratio = second / max(first, np.finfo(float).tiny)
    else:
        ratio = 1.0
    converged = trailing_grad == 0.0 or ratio < 1.0
    return StationaritySummary(
        trailing_grad_norm=trailing_grad,
        trailing_w2_step=trailing_w2,
        decay_ratio=float(ratio),
        converged=converged,
    )
