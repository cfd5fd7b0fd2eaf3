"""Small numerical checks: 1-D transport distance, gradient verification,
particle clustering for reading off discrete input laws."""

import numpy as np

from .core import ChannelModel, CostModel, ParticleSet

__all__ = ["w2_1d", "grad_check", "cluster_particles"]


def w2_1d(a, b) -> float:
    """Order-2 Wasserstein distance between two equal-size 1-D samples.

    On the line the optimal coupling is the sorted matching, so this is just
    the root mean squared gap between order statistics.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.shape != b.shape:
        raise ValueError(f"samples must have equal size, got {a.size} and {b.size}")
    if a.size == 0:
        raise ValueError("empty samples")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def _central_diff(f, x, h):
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def grad_check(target, points, step: float = 1e-5) -> float:
    """Worst relative error of analytic gradients against central differences.

    For a ChannelModel, points is an iterable of (x, y) pairs and the gradient
    checked is d/dx log p(y|x); for a CostModel it is an iterable of x.  An
    object with distortion/grad_y_distortion methods is differenced in y.
    Relative error uses |analytic - numeric| / (|analytic| + 1e-12) per
    coordinate.
    """
    worst = 0.0

    def compare(analytic, numeric):
        nonlocal worst
        err = np.abs(analytic - numeric) / (np.abs(analytic) + 1e-12)
        worst = max(worst, float(err.max()))

    if isinstance(target, ChannelModel):
        for x, y in points:
            x = np.asarray(x, dtype=np.float64)
            y = np.asarray(y, dtype=np.float64)
            analytic = target.grad_x_log_pdf(x, y)
            compare(analytic, _central_diff(lambda xx: float(target.log_pdf(xx, y)), x, step))
    elif isinstance(target, CostModel):
        for x in points:
            x = np.asarray(x, dtype=np.float64)
            compare(target.grad_cost(x), _central_diff(lambda xx: float(target.cost(xx)), x, step))
    elif hasattr(target, "grad_y_distortion"):
        for x, y in points:
            x = np.asarray(x, dtype=np.float64)
            y = np.asarray(y, dtype=np.float64)
            analytic = target.grad_y_distortion(x, y)
            compare(analytic, _central_diff(lambda yy: float(target.distortion(x, yy)), y, step))
    else:
        raise TypeError(f"no gradient contract known for {type(target).__name__}")
    return worst


def cluster_particles(particles: ParticleSet, radius: float) -> list[tuple[np.ndarray, float]]:
    """Greedy radius clustering; returns (center, mass) pairs by decreasing mass.

    The first unassigned particle (in index order) seeds a cluster that
    absorbs every unassigned particle within radius of it; the center is the
    member mean and the mass the member fraction.  Deterministic by
    construction.
    """
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    pts = particles.points
    n = particles.num_particles
    unassigned = np.ones(n, dtype=bool)
    clusters = []
    while unassigned.any():
        seed_idx = int(np.flatnonzero(unassigned)[0])
        dist = np.linalg.norm(pts - pts[seed_idx], axis=1)
        members = unassigned & (dist <= radius)
        clusters.append((pts[members].mean(axis=0), members.sum() / n))
        unassigned &= ~members
    clusters.sort(key=lambda c: -c[1])
    return clusters
