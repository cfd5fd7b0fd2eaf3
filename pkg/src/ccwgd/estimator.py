"""Importance-sampling estimates of the per-particle potential and its gradient.

For an input x against the empirical output mixture p_Y of the previous
particle set, the potential is

    V(x) = lam * b(x) - Integral p(y|x) [log p(y|x) - log p_Y(y)] dy.

Samples y_1..y_S are drawn from a proposal q(.|x) and the integral is replaced
by (1/S) sum_i w_i [log p(y_i|x) - log p_Y(y_i)] with w_i = p(y_i|x)/q(y_i|x).
The gradient differentiates the integrand only (the proposal is frozen at the
sampling point), which collapses to

    grad V(x) = lam * grad b(x)
                - (1/S) sum_i w_i * grad_x log p(y_i|x) * (log p(y_i|x) - log p_Y(y_i) + 1).

With q equal to the channel itself all weights are exactly one and that branch
skips the weight arithmetic entirely.

Reproducibility contract: each particle draws its samples from its own RNG
stream keyed by (seed, iteration, particle index), so results do not depend on
batch layout or worker count, and summation order inside every reduction is
fixed (the mixture sorts its components, see mixture_output_logpdf).
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .core import LOG_2PI, ChannelModel, ConfigurationError, CostModel, ParticleSet

__all__ = [
    "RATIO_CLAMP",
    "EstimatorError",
    "ImportanceConfig",
    "PotentialEstimate",
    "Objectives",
    "particle_rngs",
    "draw_output_samples",
    "mixture_output_logpdf",
    "estimate_potential",
    "estimate_potential_batch",
    "estimate_objectives",
]

# log p - log p_Y is clipped here before entering values and gradients, so a
# single absurd sample cannot poison an update with an overflow.
RATIO_CLAMP = 500.0

# upper bound on elements per mixture evaluation block, keeps peak memory flat
_CHUNK_ELEMS = 2**21


class EstimatorError(RuntimeError):
    """A potential estimate produced non-finite intermediates."""


@dataclass(frozen=True)
class ImportanceConfig:
    """Proposal choice for the output-space integral.

    kind "channel" samples q(.|x) = p(.|x) (unit weights); kind "gaussian"
    samples a fixed isotropic N(shift, scale^2 I) on output space regardless of
    the particle, which makes the weights informative.  num_samples = None
    inherits the solver-level sample count.  mixture_subsample, when set,
    evaluates p_Y on that many particles drawn uniformly per iteration instead
    of the full set.
    """

    kind: str = "channel"
    num_samples: int | None = None
    shift: float = 0.0
    scale: float = 1.0
    mixture_subsample: int | None = None

    def __post_init__(self):
        if self.kind not in ("channel", "gaussian"):
            raise ConfigurationError(f"importance kind must be 'channel' or 'gaussian', got {self.kind!r}")
        if self.num_samples is not None and self.num_samples < 1:
            raise ConfigurationError(f"num_samples must be >= 1, got {self.num_samples}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ConfigurationError(f"gaussian proposal scale must be positive, got {self.scale}")
        if not math.isfinite(self.shift):
            raise ConfigurationError("gaussian proposal shift must be finite")
        if self.mixture_subsample is not None and self.mixture_subsample < 1:
            raise ConfigurationError(f"mixture_subsample must be >= 1, got {self.mixture_subsample}")

    def resolved_samples(self, fallback: int) -> int:
        return int(self.num_samples) if self.num_samples is not None else int(fallback)


@dataclass(frozen=True)
class PotentialEstimate:
    value: float
    gradient: np.ndarray


class Objectives(NamedTuple):
    """Set-level summaries: Lagrangian, rate, mean cost, mean squared gradient norm."""

    lagrangian: float
    rate: float
    cost: float
    grad_norm: float


def particle_rngs(seed: int, iteration: int, count: int) -> list[np.random.Generator]:
    """Independent per-particle generators keyed by (seed, iteration, index)."""
    return [np.random.default_rng(np.random.SeedSequence((seed, iteration, i))) for i in range(count)]


def draw_output_samples(
    x: np.ndarray,
    channel: ChannelModel,
    config: ImportanceConfig,
    num_samples: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Sample the proposal for one particle x, shape (num_samples, m).

    Returns (samples, log_q); log_q is None for the channel proposal, whose
    weights are identically one.
    """
    x = np.asarray(x, dtype=np.float64)
    if config.kind == "channel":
        xs = np.broadcast_to(x, (num_samples, x.shape[-1]))
        return channel.sample_output(xs, rng), None
    m = channel.output_dim
    y = config.shift + config.scale * rng.standard_normal((num_samples, m))
    r = (y - config.shift) / config.scale
    log_q = -0.5 * np.sum(r * r, axis=-1) - m * (0.5 * LOG_2PI + math.log(config.scale))
    return y, log_q


def _log_mean_exp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    out = np.squeeze(m_safe, axis=axis) + np.log(np.mean(np.exp(a - m_safe), axis=axis))
    # rows whose every component underflows to -inf stay -inf instead of NaN
    return np.where(np.isfinite(np.squeeze(m, axis=axis)), out, -np.inf)


def _log_mean_exp_rows(a: np.ndarray) -> np.ndarray:
    """_log_mean_exp over axis 1, reusing the input buffer in the common case."""
    m = np.max(a, axis=1)
    if not np.all(np.isfinite(m)):
        return _log_mean_exp(a, axis=1)
    np.subtract(a, m[:, None], out=a)
    np.exp(a, out=a)
    return m + np.log(np.mean(a, axis=1))


def _factor_table(row: np.ndarray, col: np.ndarray) -> np.ndarray:
    # short contractions expand to elementwise multiply-adds: each table entry
    # is then bit-identical whatever the block's row count, which BLAS kernel
    # selection does not guarantee
    k = row.shape[1]
    if k > 3:
        return row @ col
    lp = row[:, 0, None] * col[None, 0, :]
    for j in range(1, k):
        lp += row[:, j, None] * col[None, j, :]
    return lp


def mixture_output_logpdf(prev: ParticleSet, y: np.ndarray, channel: ChannelModel) -> np.ndarray:
    """log of the output density of the uniform mixture over prev particles.

    log p_Y(y) = log (1/N) sum_j p(y | x_j), evaluated by log-sum-exp.  The
    particle rows are put in lexicographic order before the reduction so the
    result is bit-identical under any permutation of the particle set.

    Channels exposing log_pdf_factors (a decomposition log p(y_i|x_j) =
    row_i . col_j + rowconst_i + colconst_j) get the pairwise table built as a
    matrix product instead of broadcast density calls; contractions of three or
    fewer terms (every shipped channel) expand to a fixed elementwise order, so
    the table does not depend on how queries are batched.
    """
    pts = prev.points
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1
    flat = np.ascontiguousarray(y.reshape(-1, y.shape[-1]))
    out = np.empty(flat.shape[0])
    chunk = max(1, _CHUNK_ELEMS // pts.shape[0])
    factors = getattr(channel, "log_pdf_factors", None)
    if factors is not None:
        row, rowconst, col, colconst = factors(pts, flat)
        for start in range(0, flat.shape[0], chunk):
            lp = _factor_table(row[start : start + chunk], col)
            if colconst is not None:
                lp += colconst[None, :]
            out[start : start + chunk] = _log_mean_exp_rows(lp)
        if rowconst is not None:
            out += rowconst
    else:
        for start in range(0, flat.shape[0], chunk):
            block = flat[start : start + chunk]
            lp = channel.log_pdf(pts[None, :, :], block[:, None, :])
            out[start : start + chunk] = _log_mean_exp(lp, axis=1)
    if single:
        return float(out[0])
    return out.reshape(y.shape[:-1])


def _potential_terms(points, samples, log_q, prev, channel, cost, lam):
    """Potential values and gradients for a batch; shapes (B,) and (B, n)."""
    log_own = channel.log_pdf(points[:, None, :], samples)  # (B, S)
    grad_own = channel.grad_x_log_pdf(points[:, None, :], samples)  # (B, S, n)
    log_mix = mixture_output_logpdf(prev, samples, channel)  # (B, S)
    ratio = np.clip(log_own - log_mix, -RATIO_CLAMP, RATIO_CLAMP)
    if log_q is None:
        integral = np.mean(ratio, axis=1)
        grad_integral = np.mean(grad_own * (ratio + 1.0)[..., None], axis=1)
    else:
        if not np.all(np.isfinite(log_q)):
            raise EstimatorError("proposal density vanished at a drawn sample")
        w = np.exp(log_own - log_q)
        integral = np.mean(w * ratio, axis=1)
        grad_integral = np.mean((w * (ratio + 1.0))[..., None] * grad_own, axis=1)
    values = lam * cost.cost(points) - integral
    grads = lam * cost.grad_cost(points) - grad_integral
    if not np.all(np.isfinite(values)) or not np.all(np.isfinite(grads)):
        bad = np.flatnonzero(~(np.isfinite(values) & np.all(np.isfinite(grads), axis=-1)))[0]
        raise EstimatorError(f"non-finite potential estimate for particle index {int(bad)}")
    return values, grads


def _check_inputs(prev, channel, lam):
    if prev.dim != channel.input_dim:
        raise ConfigurationError(f"particle dim {prev.dim} != channel input dim {channel.input_dim}")
    if not (lam >= 0 and math.isfinite(lam)):
        raise ValueError(f"multiplier must be finite and >= 0, got {lam}")


def estimate_potential_batch(
    points: np.ndarray,
    prev: ParticleSet,
    channel: ChannelModel,
    cost: CostModel,
    lam: float,
    config: ImportanceConfig,
    num_samples: int,
    rngs: Sequence[np.random.Generator] | np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Potential values and gradients for each row of points.

    rngs may be one generator (consumed sequentially, row by row) or one per
    row; the per-row option is what gives the solver its layout-independent
    streams.  Sampling is the only sequential part; all density math runs as
    one vectorized batch.
    """
    _check_inputs(prev, channel, lam)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n_rows = points.shape[0]
    if isinstance(rngs, np.random.Generator):
        rngs = [rngs] * n_rows
    elif len(rngs) != n_rows:
        raise ValueError(f"got {len(rngs)} generators for {n_rows} particles")
    drawn = [draw_output_samples(points[i], channel, config, num_samples, rngs[i]) for i in range(n_rows)]
    samples = np.stack([d[0] for d in drawn])
    log_q = None if drawn[0][1] is None else np.stack([d[1] for d in drawn])
    return _potential_terms(points, samples, log_q, prev, channel, cost, lam)


def estimate_potential(
    x: np.ndarray,
    prev: ParticleSet,
    channel: ChannelModel,
    cost: CostModel,
    lam: float,
    config: ImportanceConfig,
    num_samples: int,
    rng: np.random.Generator,
) -> PotentialEstimate:
    """Single-particle potential estimate; a batch of one through the same path."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"x must be a single input vector, got shape {x.shape}")
    values, grads = estimate_potential_batch(x[None, :], prev, channel, cost, lam, config, num_samples, rng)
    return PotentialEstimate(value=float(values[0]), gradient=grads[0])


def estimate_objectives(
    particles: ParticleSet,
    prev: ParticleSet,
    channel: ChannelModel,
    cost: CostModel,
    lam: float,
    config: ImportanceConfig,
    num_samples: int,
    rngs: Sequence[np.random.Generator] | np.random.Generator,
) -> Objectives:
    """Lagrangian, rate, mean cost and mean squared gradient norm of a particle set.

    L_hat averages the per-particle potentials, B_hat averages the cost, and
    the rate is recovered as R_hat = lam * B_hat - L_hat.
    """
    values, grads = estimate_potential_batch(
        particles.points, prev, channel, cost, lam, config, num_samples, rngs
    )
    return objective_summaries(values, grads, cost.cost(particles.points), lam)


def objective_summaries(values, grads, costs, lam) -> Objectives:
    lagrangian = float(np.mean(values))
    mean_cost = float(np.mean(costs))
    with np.errstate(over="ignore"):  # diverging runs saturate to inf and abort upstream
        grad_norm = float(np.mean(np.sum(grads * grads, axis=-1)))
    return Objectives(
        lagrangian=lagrangian,
        rate=lam * mean_cost - lagrangian,
        cost=mean_cost,
        grad_norm=grad_norm,
    )
