"""Reference rates with known values: closed forms where they exist, seeded
Monte Carlo where they do not.  The particle solver is validated against these."""

import math

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import logsumexp

from .core import LOG_2PI

__all__ = [
    "awgn_capacity",
    "waterfilling_capacity",
    "fading_csir_capacity",
    "fading_nocsir_gaussian_rate",
    "gaussian_rd_rate",
]


def awgn_capacity(power: float) -> float:
    """Scalar unit-noise AWGN: C = 0.5 log(1 + P) nats."""
    if power < 0:
        raise ValueError(f"power must be >= 0, got {power}")
    return 0.5 * math.log1p(power)


def waterfilling_capacity(matrix, power: float) -> tuple[float, np.ndarray]:
    """Capacity of y = Hx + z under sum power P, plus the per-mode allocation.

    Water-filling over the squared singular values g_i of H: p_i = (mu - 1/g_i)_+
    with the water level mu chosen so the active p_i sum to P.  The returned
    allocation is ordered by decreasing gain.
    """
    if power <= 0:
        raise ValueError(f"power must be > 0, got {power}")
    gains = np.linalg.svd(np.asarray(matrix, dtype=np.float64), compute_uv=False) ** 2
    gains = gains[gains > 0]
    if gains.size == 0:
        return 0.0, np.zeros(0)
    inv = 1.0 / gains  # ascending in 1/g since svd returns descending gains
    alloc = np.zeros_like(gains)
    for active in range(gains.size, 0, -1):
        mu = (power + inv[:active].sum()) / active
        p = mu - inv[:active]
        if p[-1] >= 0:  # weakest active mode still non-negative
            alloc[:active] = p
            break
    capacity = float(np.sum(0.5 * np.log1p(alloc * gains)))
    return capacity, alloc


def fading_csir_capacity(power: float, num_samples: int = 10**6, seed: int = 0) -> float:
    """Fading channel with receiver-known gain: C = E[0.5 log(1 + P s^2)], s ~ N(0,1).

    No closed form; estimated by Monte Carlo with the given seed.  The standard
    error at the default sample count is below 1e-3 nats for P <= 10.
    """
    s = np.random.default_rng(seed).standard_normal(num_samples)
    return float(np.mean(0.5 * np.log1p(power * s * s)))


def fading_nocsir_gaussian_rate(power: float, num_samples: int = 10**6, seed: int = 0) -> float:
    """Rate of a Gaussian input N(0, P) on the hidden-gain fading channel.

    A lower bound on capacity, not the capacity itself (the optimum is
    discrete).  I(x; y) is estimated as E[log p(y|x) - log p_Y(y)] over sampled
    pairs, with the output marginal p_Y(y) = E_x N(y; 0, 1 + x^2) evaluated by
    Gauss-Hermite quadrature, which is exact enough that the Monte Carlo error
    dominates.
    """
    rng = np.random.default_rng(seed)
    x = math.sqrt(power) * rng.standard_normal(num_samples)
    v = 1.0 + x * x
    y = np.sqrt(v) * rng.standard_normal(num_samples)
    log_cond = -0.5 * y * y / v - 0.5 * (LOG_2PI + np.log(v))

    # p_Y via 201-node Gauss-Hermite over x ~ N(0, P), blocked so the sample
    # count never sets the peak memory
    t, w = hermgauss(201)
    xg = math.sqrt(2.0 * power) * t
    vg = 1.0 + xg * xg
    base = np.log(w) - 0.5 * math.log(math.pi) - 0.5 * (LOG_2PI + np.log(vg))
    log_marg = np.empty(num_samples)
    block = 1 << 16
    for s in range(0, num_samples, block):
        yy = y[s : s + block] ** 2
        log_marg[s : s + block] = logsumexp(base[None, :] - 0.5 * yy[:, None] / vg[None, :], axis=1)
    return float(np.mean(log_cond - log_marg))


def gaussian_rd_rate(distortion: float, variance: float = 1.0) -> float:
    """Squared-error rate-distortion of N(0, variance): R(D) = 0.5 log(variance/D)."""
    if not 0 < distortion:
        raise ValueError(f"distortion must be > 0, got {distortion}")
    if distortion >= variance:
        return 0.0
    return 0.5 * math.log(variance / distortion)
