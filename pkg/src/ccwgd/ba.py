"""Fixed-point capacity iteration for finite channels, with a proximal knob.

The update reweights the input law by the exponentiated per-input divergence
score

    D(x) = sum_y P(y|x) log(P(y|x) / P_Y(y)) - lam * b(x),
    P_new(x) proportional to P(x) * exp(tau * D(x)),

all in log space.  tau = 1 is the classic alternating-minimization step; other
tau values trade per-step progress against stability.  Zero-probability inputs
are absorbing (log 0 stays -inf), so a support choice made at the start is
respected forever; ba_solve prunes explicit zeros up front and re-embeds them
in the returned law.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .channels import DiscreteChannel

__all__ = [
    "BaResult",
    "validate_simplex",
    "ba_prox_step",
    "mutual_information",
    "mean_cost",
    "ba_solve",
    "sweep_lambda",
    "solve_for_budget",
]


@dataclass(frozen=True)
class BaResult:
    capacity_nats: float
    mean_cost: float
    p_x: np.ndarray
    iterations: int
    converged: bool


def validate_simplex(p, atol: float = 1e-12) -> np.ndarray:
    """Check p is a probability vector within atol; returns it as float64."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise ValueError(f"expected a 1-D probability vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < -atol):
        raise ValueError("probability vector has negative or non-finite entries")
    total = p.sum()
    if abs(total - 1.0) > max(atol, 1e-9):
        raise ValueError(f"probability vector sums to {total:.17g}, expected 1")
    return np.clip(p, 0.0, None)


def _log_matrix(channel: DiscreteChannel) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(channel.matrix)


def _divergence_scores(log_px: np.ndarray, channel: DiscreteChannel, lam: float) -> np.ndarray:
    """D(x) for every input, against the output law induced by exp(log_px)."""
    log_p = _log_matrix(channel)
    log_py = logsumexp(log_px[:, None] + log_p, axis=0)  # (ny,)
    m = channel.matrix
    with np.errstate(invalid="ignore"):
        terms = np.where(m > 0, m * (log_p - log_py[None, :]), 0.0)
    return terms.sum(axis=1) - lam * channel.costs


def ba_prox_step(p_x: np.ndarray, channel: DiscreteChannel, lam: float, tau: float) -> np.ndarray:
    """One exponentiated-score reweighting of the input law.

    Inputs with p_x = 0 stay at 0.  Raises if every entry of the update
    vanishes, which can only happen on an all-zero input law.
    """
    p_x = validate_simplex(p_x)
    if not (tau > 0 and math.isfinite(tau)):
        raise ValueError(f"tau must be positive and finite, got {tau}")
    if not (lam >= 0 and math.isfinite(lam)):
        raise ValueError(f"lam must be finite and >= 0, got {lam}")
    if p_x.shape[0] != channel.num_inputs:
        raise ValueError(f"input law has {p_x.shape[0]} entries, channel has {channel.num_inputs}")
    with np.errstate(divide="ignore"):
        log_px = np.log(p_x)
    log_new = log_px + tau * _divergence_scores(log_px, channel, lam)
    norm = logsumexp(log_new)
    if not np.isfinite(norm):
        raise ValueError("update numerator is identically zero")
    return np.exp(log_new - norm)


def mutual_information(p_x: np.ndarray, channel: DiscreteChannel) -> float:
    """I(X; Y) in nats for the given input law."""
    p_x = validate_simplex(p_x)
    log_p = _log_matrix(channel)
    with np.errstate(divide="ignore"):
        log_px = np.log(p_x)
    log_py = logsumexp(log_px[:, None] + log_p, axis=0)
    m = channel.matrix
    with np.errstate(invalid="ignore"):
        terms = np.where(m > 0, m * (log_p - log_py[None, :]), 0.0)
    return float(np.sum(p_x * terms.sum(axis=1)))


def mean_cost(p_x: np.ndarray, channel: DiscreteChannel) -> float:
    return float(np.dot(validate_simplex(p_x), channel.costs))


def ba_solve(
    channel: DiscreteChannel,
    lam: float = 0.0,
    tau: float | Callable[[int], float] = 1.0,
    tol: float = 1e-10,
    max_iters: int = 20000,
    p0: np.ndarray | None = None,
) -> BaResult:
    """Iterate ba_prox_step to a fixed point from p0 (uniform by default).

    Convergence is declared when the sup-norm change of the law drops below
    tol.  The capacity reported is the mutual information of the final law;
    under a cost constraint the pair (capacity_nats, mean_cost) is one point
    of the capacity-cost curve at slope lam.
    """
    na = channel.num_inputs
    if p0 is None:
        p = np.full(na, 1.0 / na)
        support = np.arange(na)
        sub = channel
    else:
        p0 = validate_simplex(p0)
        if p0.shape[0] != na:
            raise ValueError(f"p0 has {p0.shape[0]} entries, channel has {na}")
        # prune dead inputs once instead of carrying absorbing zeros
        support = np.flatnonzero(p0 > 0)
        if support.size == 0:
            raise ValueError("p0 has empty support")
        sub = DiscreteChannel(
            matrix=channel.matrix[support],
            inputs=channel.inputs[support],
            costs=channel.costs[support],
        )
        p = p0[support] / p0[support].sum()

    tau_at = tau if callable(tau) else (lambda k: tau)
    converged = False
    iterations = max_iters
    for k in range(1, max_iters + 1):
        p_next = ba_prox_step(p, sub, lam, tau_at(k))
        if np.max(np.abs(p_next - p)) < tol:
            p = p_next
            converged, iterations = True, k
            break
        p = p_next

    full = np.zeros(na)
    full[support] = p
    return BaResult(
        capacity_nats=mutual_information(p, sub),
        mean_cost=mean_cost(p, sub),
        p_x=full,
        iterations=iterations,
        converged=converged,
    )


def sweep_lambda(channel: DiscreteChannel, lams, **kwargs) -> list[tuple[float, BaResult]]:
    """Trace the capacity-cost curve: one ba_solve per slope, in the given order."""
    return [(float(lam), ba_solve(channel, lam=float(lam), **kwargs)) for lam in lams]


def solve_for_budget(
    channel: DiscreteChannel,
    budget: float,
    budget_tol: float = 1e-6,
    max_bisections: int = 80,
    **kwargs,
) -> tuple[float, BaResult]:
    """Capacity at a cost budget, by bisecting the slope.

    The mean cost of the slope-lam optimizer is non-increasing in lam, so the
    constrained capacity is found by bisecting lam until the optimizer's cost
    meets the budget.  A budget at or above the unconstrained optimizer's cost
    returns the lam = 0 solution.
    """
    if not (budget > 0 and math.isfinite(budget)):
        raise ValueError(f"budget must be positive and finite, got {budget}")
    base = ba_solve(channel, lam=0.0, **kwargs)
    if base.mean_cost <= budget + budget_tol:
        return 0.0, base
    lo, hi = 0.0, 1.0
    res_hi = ba_solve(channel, lam=hi, **kwargs)
    while res_hi.mean_cost > budget and hi < 1e12:
        lo, hi = hi, 2.0 * hi
        res_hi = ba_solve(channel, lam=hi, **kwargs)
    best = res_hi
    for _ in range(max_bisections):
        mid = 0.5 * (lo + hi)
        res = ba_solve(channel, lam=mid, **kwargs)
        if abs(res.mean_cost - budget) <= budget_tol:
            return mid, res
        if res.mean_cost > budget:
            lo = mid
        else:
            hi, best = mid, res
    return hi, best
