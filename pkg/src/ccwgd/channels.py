"""Channel models and the grid quantizer.

The continuous channels implement the ChannelModel interface (log-density,
input gradient, sampler) with full broadcasting over leading axes.  The
quantizer turns a scalar continuous channel into a DiscreteChannel by
integrating the transition density over output bins, which is what the
discrete fixed-point solver consumes.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from numpy.polynomial.legendre import leggauss

from .core import LOG_2PI, ChannelModel, ConfigurationError, CostModel

__all__ = [
    "MimoAwgnChannel",
    "FadingCsirChannel",
    "FadingNoCsirChannel",
    "DiscreteChannel",
    "QuantizationError",
    "awgn",
    "random_mimo_matrix",
    "quantize_channel",
]


class QuantizationError(ValueError):
    """Raised when an output grid fails to capture enough conditional mass."""


class MimoAwgnChannel(ChannelModel):
    """Linear Gaussian channel y = H x + z, z ~ N(0, I_m).

    log p(y|x) = -||y - Hx||^2 / 2 - (m/2) log(2 pi)
    d/dx log p(y|x) = H^T (y - Hx)
    """

    def __init__(self, matrix):
        h = np.asarray(matrix, dtype=np.float64)
        if h.ndim != 2 or not np.all(np.isfinite(h)):
            raise ConfigurationError(f"channel matrix must be a finite 2-D array, got shape {h.shape}")
        self._h = h
        self.output_dim, self.input_dim = h.shape

    @property
    def matrix(self) -> np.ndarray:
        return self._h

    def _mean(self, x):
        return np.asarray(x, dtype=np.float64) @ self._h.T

    def log_pdf(self, x, y):
        r = np.asarray(y, dtype=np.float64) - self._mean(x)
        return -0.5 * np.sum(r * r, axis=-1) - 0.5 * self.output_dim * LOG_2PI

    def grad_x_log_pdf(self, x, y):
        r = np.asarray(y, dtype=np.float64) - self._mean(x)
        return r @ self._h

    def sample_output(self, x, rng):
        mean = self._mean(x)
        return mean + rng.standard_normal(mean.shape)

    def log_pdf_factors(self, points, y):
        # log p(y_i|x_j) = y_i . z_j - ||z_j||^2/2 - ||y_i||^2/2 - const, z = Hx
        z = points @ self._h.T  # (N, m)
        col = np.concatenate([z.T, -0.5 * np.sum(z * z, axis=1)[None, :]], axis=0)
        row = np.concatenate([y, np.ones((y.shape[0], 1))], axis=1)
        rowconst = -0.5 * np.sum(y * y, axis=1) - 0.5 * self.output_dim * LOG_2PI
        return row, rowconst, col, None


def awgn() -> MimoAwgnChannel:
    """Scalar unit-noise AWGN channel y = x + z."""
    return MimoAwgnChannel([[1.0]])


def random_mimo_matrix(outputs: int, inputs: int, seed: int) -> np.ndarray:
    """Gaussian matrix rescaled so its squared singular values sum to one."""
    g = np.random.default_rng(seed).standard_normal((outputs, inputs))
    return g / np.linalg.norm(g)


class FadingCsirChannel(ChannelModel):
    """Scalar fading channel y = s x + z with the gain revealed at the receiver.

    The observed output is the pair (y, s), with s ~ N(0, 1) independent of z,
    so the conditional density factors as N(y; s x, 1) N(s; 0, 1).
    """

    input_dim = 1
    output_dim = 2

    def log_pdf(self, x, y):
        x1 = np.asarray(x, dtype=np.float64)[..., 0]
        out = np.asarray(y, dtype=np.float64)
        yv, s = out[..., 0], out[..., 1]
        r = yv - s * x1
        return -0.5 * (r * r + s * s) - LOG_2PI

    def grad_x_log_pdf(self, x, y):
        x1 = np.asarray(x, dtype=np.float64)[..., 0]
        out = np.asarray(y, dtype=np.float64)
        yv, s = out[..., 0], out[..., 1]
        return (s * (yv - s * x1))[..., None]

    def sample_output(self, x, rng):
        x1 = np.asarray(x, dtype=np.float64)[..., 0]
        eps = rng.standard_normal(x1.shape + (2,))
        s = eps[..., 0]
        yv = s * x1 + eps[..., 1]
        return np.stack([yv, s], axis=-1)

    def log_pdf_factors(self, points, y):
        # expand -(y - s x)^2/2: the cross terms are bilinear in (ys, s^2) vs (x, x^2)
        yv, s = y[:, 0], y[:, 1]
        row = np.stack([yv * s, -0.5 * s * s], axis=1)
        rowconst = -0.5 * (yv * yv + s * s) - LOG_2PI
        x1 = points[:, 0]
        col = np.stack([x1, x1 * x1], axis=0)
        return row, rowconst, col, None


class FadingNoCsirChannel(ChannelModel):
    """Scalar fading channel y = s x + z with the gain hidden from both ends.

    Marginalizing s ~ N(0,1) gives y | x ~ N(0, 1 + x^2): the input moves
    information only through the output variance.
    """

    input_dim = 1
    output_dim = 1

    def log_pdf(self, x, y):
        x1 = np.asarray(x, dtype=np.float64)[..., 0]
        y1 = np.asarray(y, dtype=np.float64)[..., 0]
        v = 1.0 + x1 * x1
        return -0.5 * (y1 * y1) / v - 0.5 * (LOG_2PI + np.log(v))

    def grad_x_log_pdf(self, x, y):
        x1 = np.asarray(x, dtype=np.float64)[..., 0]
        y1 = np.asarray(y, dtype=np.float64)[..., 0]
        v = 1.0 + x1 * x1
        return (x1 * (y1 * y1 - v) / (v * v))[..., None]

    def sample_output(self, x, rng):
        x1 = np.asarray(x, dtype=np.float64)[..., 0]
        std = np.sqrt(1.0 + x1 * x1)
        return (std * rng.standard_normal(x1.shape))[..., None]

    def log_pdf_factors(self, points, y):
        y1 = y[:, 0]
        row = (-0.5 * y1 * y1)[:, None]
        v = 1.0 + points[:, 0] ** 2
        col = (1.0 / v)[None, :]
        colconst = -0.5 * (LOG_2PI + np.log(v))
        return row, None, col, colconst


@dataclass(frozen=True)
class DiscreteChannel:
    """Finite channel: row-stochastic transition matrix plus input grid and costs."""

    matrix: np.ndarray
    inputs: np.ndarray | None = None
    costs: np.ndarray | None = None

    def __post_init__(self):
        m = np.array(np.asarray(self.matrix, dtype=np.float64), order="C")
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise ConfigurationError(f"transition matrix must be 2-D, got shape {m.shape}")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ConfigurationError("transition matrix entries must be finite and >= 0")
        rows = m.sum(axis=1)
        bad = np.flatnonzero(np.abs(rows - 1.0) > 1e-12)
        if bad.size:
            raise ConfigurationError(
                f"transition matrix row {bad[0]} sums to {rows[bad[0]]:.17g}, expected 1 within 1e-12"
            )
        na = m.shape[0]
        inputs = self.inputs
        inputs = np.arange(na, dtype=np.float64) if inputs is None else np.asarray(inputs, dtype=np.float64)
        costs = self.costs
        costs = np.zeros(na) if costs is None else np.asarray(costs, dtype=np.float64)
        if inputs.shape[0] != na:
            raise ConfigurationError(f"inputs has length {inputs.shape[0]}, expected {na}")
        if costs.shape != (na,):
            raise ConfigurationError(f"costs must have shape ({na},), got {costs.shape}")
        if not np.all(np.isfinite(costs)) or np.any(costs < 0):
            raise ConfigurationError("costs must be finite and >= 0")
        m.flags.writeable = False
        inputs = np.array(inputs, order="C")
        inputs.flags.writeable = False
        costs = np.array(costs, order="C")
        costs.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "costs", costs)

    @property
    def num_inputs(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.matrix.shape[1]


# Gauss-Legendre order for finite bins.  The integrands are smooth Gaussians
# over narrow intervals, so 96 nodes is far past machine precision.
_GL_NODES, _GL_WEIGHTS = leggauss(96)


def _pdf_scalar(channel: ChannelModel, x: float, y: float) -> float:
    return float(np.exp(channel.log_pdf(np.array([x]), np.array([y]))))


def quantize_channel(
    channel: ChannelModel,
    input_grid: np.ndarray,
    output_edges: np.ndarray,
    cost: CostModel,
    min_coverage: float = 0.9999,
) -> DiscreteChannel:
    """Bin a scalar channel onto finite grids by integrating p(y|x) per bin.

    output_edges may start/end with -inf/+inf; those tail bins are integrated
    adaptively, interior bins with fixed high-order quadrature.  Each input's
    raw bin mass must reach min_coverage before rows are renormalized to sum
    to one; a short row raises QuantizationError naming the offending input.
    """
    if channel.input_dim != 1 or channel.output_dim != 1:
        raise ConfigurationError("quantize_channel handles scalar channels only")
    grid = np.asarray(input_grid, dtype=np.float64)
    edges = np.asarray(output_edges, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1 or not np.all(np.isfinite(grid)):
        raise ConfigurationError("input grid must be a finite 1-D array")
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ConfigurationError("output edges must be strictly increasing with >= 2 entries")
    if np.any(np.diff(grid) <= 0):
        raise ConfigurationError("input grid must be strictly increasing")

    na, nb = grid.size, edges.size - 1
    masses = np.zeros((na, nb))
    finite = np.isfinite(edges[:-1]) & np.isfinite(edges[1:])

    if np.any(finite):
        lo, hi = edges[:-1][finite], edges[1:][finite]
        half = 0.5 * (hi - lo)
        nodes = 0.5 * (lo + hi)[:, None] + half[:, None] * _GL_NODES[None, :]  # (nf, q)
        lp = channel.log_pdf(
            grid[:, None, None, None],  # (na, 1, 1, [n=1])
            nodes[None, :, :, None],  # (1, nf, q, [m=1])
        )
        masses[:, finite] = np.sum(np.exp(lp) * _GL_WEIGHTS[None, None, :], axis=-1) * half[None, :]

    for j in np.flatnonzero(~finite):
        a, b = edges[j], edges[j + 1]
        for i, x in enumerate(grid):
            val, _ = quad(lambda yy: _pdf_scalar(channel, x, yy), a, b, limit=200)
            masses[i, j] = val

    row_mass = masses.sum(axis=1)
    short = np.flatnonzero(row_mass < min_coverage)
    if short.size:
        i = short[0]
        raise QuantizationError(
            f"output grid captures only {row_mass[i]:.6f} of the mass at input x = {grid[i]:g} "
            f"(need >= {min_coverage}); widen the output range"
        )
    matrix = masses / row_mass[:, None]
    costs = np.asarray(cost.cost(grid[:, None]), dtype=np.float64)
    return DiscreteChannel(matrix=matrix, inputs=grid, costs=costs)
