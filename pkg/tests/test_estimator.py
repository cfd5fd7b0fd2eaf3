"""Importance-sampling potential estimator against quadrature and closed forms."""

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad
from scipy.special import logsumexp

from ccwgd.channels import FadingCsirChannel, FadingNoCsirChannel, MimoAwgnChannel, awgn, random_mimo_matrix
from ccwgd.core import ConfigurationError, ParticleSet, QuadraticCost
from ccwgd.estimator import (
    EstimatorError,
    ImportanceConfig,
    estimate_objectives,
    estimate_potential,
    estimate_potential_batch,
    mixture_output_logpdf,
    objective_summaries,
    particle_rngs,
)

CHANNEL_CFG = ImportanceConfig(kind="channel")


def _mixture_logpdf_reference(prev_points, y):
    """Test-local mixture density for the unit-noise scalar channel."""
    comps = stats.norm.logpdf(np.asarray(y)[..., None], loc=prev_points.ravel())
    return logsumexp(comps, axis=-1) - np.log(prev_points.shape[0])


def test_mixture_closed_form_values():
    single = ParticleSet(np.array([[0.0]]))
    got = mixture_output_logpdf(single, np.array([[0.0]]), awgn())
    np.testing.assert_allclose(got, [-0.9189385332046727], rtol=1e-15)

    pair = ParticleSet(np.array([[-1.0], [1.0]]))
    got = mixture_output_logpdf(pair, np.array([[0.0]]), awgn())
    np.testing.assert_allclose(got, [-1.4189385332046727], rtol=1e-15)


@pytest.mark.parametrize(
    "channel",
    [awgn(), MimoAwgnChannel(random_mimo_matrix(2, 2, seed=3)), FadingCsirChannel(), FadingNoCsirChannel()],
    ids=["awgn", "mimo", "csir", "nocsir"],
)
def test_mixture_matches_direct_logsumexp(channel):
    rng = np.random.default_rng(4)
    prev = ParticleSet(rng.normal(size=(13, channel.input_dim)))
    y = channel.sample_output(rng.normal(size=(21, channel.input_dim)), rng)
    table = channel.log_pdf(prev.points[:, None, :], y[None, :, :])
    expected = logsumexp(table, axis=0) - np.log(13)
    got = mixture_output_logpdf(prev, y, channel)
    np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-12)


def test_mixture_permutation_invariance_is_bitexact():
    rng = np.random.default_rng(8)
    pts = rng.normal(size=(32, 2))
    y = rng.normal(size=(50, 2))
    channel = MimoAwgnChannel(random_mimo_matrix(2, 2, seed=0))
    base = mixture_output_logpdf(ParticleSet(pts), y, channel)
    for seed in range(3):
        perm = np.random.default_rng(seed).permutation(32)
        other = mixture_output_logpdf(ParticleSet(pts[perm]), y, channel)
        assert np.array_equal(base, other)


def test_mixture_scalar_query_matches_batch():
    rng = np.random.default_rng(2)
    prev = ParticleSet(rng.normal(size=(7, 1)))
    y = rng.normal(size=(5, 1))
    batch = mixture_output_logpdf(prev, y, awgn())
    for i in range(5):
        single = mixture_output_logpdf(prev, y[i], awgn())
        assert np.float64(single) == batch[i]


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_mixture_extreme_queries_stay_defined():
    prev = ParticleSet(np.array([[0.0], [0.5]]))
    far = mixture_output_logpdf(prev, np.array([[100.0]]), awgn())
    assert np.isfinite(far[0]) and far[0] < -4000
    under = mixture_output_logpdf(prev, np.array([[1e200]]), awgn())
    assert under[0] == -np.inf  # full underflow, never NaN


def _potential_by_quadrature(x, prev_points, lam):
    """V(x) for the unit-noise scalar channel via adaptive quadrature."""

    def integrand(y):
        lp = stats.norm.logpdf(y, loc=x)
        return np.exp(lp) * (lp - _mixture_logpdf_reference(prev_points, y))

    val, _ = quad(integrand, x - 10.0, x + 10.0, limit=200)
    return lam * x * x - val


def test_potential_matches_quadrature():
    rng = np.random.default_rng(31)
    prev = ParticleSet(rng.normal(size=(16, 1)))
    x = np.array([1.0])
    lam = 0.3
    exact = _potential_by_quadrature(1.0, prev.points, lam)
    vals = [
        estimate_potential(
            x, prev, awgn(), QuadraticCost(), lam, CHANNEL_CFG, 4096, np.random.default_rng(s)
        ).value
        for s in range(30)
    ]
    err = abs(np.mean(vals) - exact)
    assert err < 0.01, (np.mean(vals), exact)


def test_potential_mse_decreases_with_sample_count():
    rng = np.random.default_rng(31)
    prev = ParticleSet(rng.normal(size=(16, 1)))
    exact = _potential_by_quadrature(1.0, prev.points, 0.3)
    mses = []
    for ns in (64, 512, 4096):
        errs = [
            estimate_potential(
                np.array([1.0]), prev, awgn(), QuadraticCost(), 0.3,
                CHANNEL_CFG, ns, np.random.default_rng(1000 + s),
            ).value
            - exact
            for s in range(40)
        ]
        mses.append(np.mean(np.square(errs)))
    assert mses[0] > mses[1] > mses[2], mses


def test_kl_against_single_atom():
    # against prev = {0}, lam = 0 the potential is -KL(N(x,1) || N(0,1))
    prev = ParticleSet(np.array([[0.0]]))
    est = estimate_potential(
        np.array([1.0]), prev, awgn(), QuadraticCost(), 0.0,
        CHANNEL_CFG, 100000, np.random.default_rng(6),
    )
    assert abs(est.value - (-0.5)) < 0.02


@pytest.mark.parametrize(
    "channel",
    [awgn(), MimoAwgnChannel(random_mimo_matrix(2, 2, seed=3)), FadingCsirChannel(), FadingNoCsirChannel()],
    ids=["awgn", "mimo", "csir", "nocsir"],
)
def test_gradient_matches_common_random_difference(channel):
    # fixed-proposal samples do not move with x, so rerunning the estimate
    # with the same seed at displaced points differentiates the estimator
    cfg = ImportanceConfig(kind="gaussian", shift=0.0, scale=2.0)
    rng = np.random.default_rng(12)
    prev = ParticleSet(rng.normal(size=(6, channel.input_dim)))
    x0 = rng.normal(size=channel.input_dim) * 0.5
    lam = 0.7
    h = 1e-5

    def value_at(x):
        return estimate_potential(
            x, prev, channel, QuadraticCost(), lam, cfg, 2000, np.random.default_rng(55)
        ).value

    est = estimate_potential(
        x0, prev, channel, QuadraticCost(), lam, cfg, 2000, np.random.default_rng(55)
    )
    for j in range(channel.input_dim):
        e = np.zeros(channel.input_dim)
        e[j] = h
        fd = (value_at(x0 + e) - value_at(x0 - e)) / (2 * h)
        rel = abs(est.gradient[j] - fd) / (abs(fd) + 1e-12)
        assert rel <= 1e-4, (j, est.gradient[j], fd)


def test_channel_proposal_gradient_unbiased_for_quadrature_derivative():
    # with the channel proposal the samples move with x, so finite differences
    # of one realized estimate no longer apply; check the mean of the score-form
    # gradient against the derivative of the quadrature potential instead
    rng = np.random.default_rng(31)
    prev = ParticleSet(rng.normal(size=(16, 1)))
    lam, x0, h = 0.3, 1.0, 1e-4
    exact = (_potential_by_quadrature(x0 + h, prev.points, lam)
             - _potential_by_quadrature(x0 - h, prev.points, lam)) / (2 * h)
    grads = [
        estimate_potential(
            np.array([x0]), prev, awgn(), QuadraticCost(), lam, CHANNEL_CFG, 4096,
            np.random.default_rng(s),
        ).gradient[0]
        for s in range(60)
    ]
    # 5x the observed standard error of the mean, ~7% of the signal
    assert abs(np.mean(grads) - exact) < 0.012, (np.mean(grads), exact)


def test_gaussian_proposal_agrees_with_channel_proposal():
    rng = np.random.default_rng(3)
    prev = ParticleSet(rng.normal(size=(12, 1)))
    exact = _potential_by_quadrature(0.8, prev.points, 0.5)
    cfg = ImportanceConfig(kind="gaussian", shift=0.8, scale=1.8)
    vals = [
        estimate_potential(
            np.array([0.8]), prev, awgn(), QuadraticCost(), 0.5, cfg, 8192,
            np.random.default_rng(200 + s),
        ).value
        for s in range(20)
    ]
    assert abs(np.mean(vals) - exact) < 0.02


def test_single_point_estimate_equals_batch_row():
    rng = np.random.default_rng(9)
    prev = ParticleSet(rng.normal(size=(10, 1)))
    points = rng.normal(size=(4, 1))
    rngs = particle_rngs(seed=5, iteration=3, count=4)
    values, grads = estimate_potential_batch(
        points, prev, awgn(), QuadraticCost(), 0.4, CHANNEL_CFG, 256, rngs
    )
    est = estimate_potential(
        points[2], prev, awgn(), QuadraticCost(), 0.4, CHANNEL_CFG, 256,
        particle_rngs(seed=5, iteration=3, count=4)[2],
    )
    assert est.value == values[2]
    assert np.array_equal(est.gradient, grads[2])


def test_ratio_clamp_keeps_estimates_finite():
    # distant mixture atom underflows p_Y at every sample; the clamp bounds
    # the log ratio instead of propagating inf
    prev = ParticleSet(np.array([[1e8]]))
    est = estimate_potential(
        np.array([0.0]), prev, awgn(), QuadraticCost(), 0.2,
        CHANNEL_CFG, 512, np.random.default_rng(0),
    )
    assert np.isfinite(est.value)
    assert np.all(np.isfinite(est.gradient))
    assert est.value == pytest.approx(-500.0, abs=1e-9)


def test_batch_invariant_to_mixture_particle_order():
    rng = np.random.default_rng(14)
    prev = ParticleSet(rng.normal(size=(8, 1)))
    points = rng.normal(size=(3, 1))
    full = estimate_potential_batch(
        points, prev, awgn(), QuadraticCost(), 0.1, CHANNEL_CFG, 128,
        particle_rngs(0, 1, 3),
    )
    shuffled = ParticleSet(prev.points[np.random.default_rng(1).permutation(8)])
    sub = estimate_potential_batch(
        points, shuffled, awgn(), QuadraticCost(), 0.1, CHANNEL_CFG, 128,
        particle_rngs(0, 1, 3),
    )
    for a, b in zip(full, sub):
        assert np.array_equal(a, b)


def test_particle_rngs_are_reproducible_and_distinct():
    a = particle_rngs(seed=7, iteration=2, count=3)
    b = particle_rngs(seed=7, iteration=2, count=3)
    draws_a = [r.standard_normal(4) for r in a]
    draws_b = [r.standard_normal(4) for r in b]
    for da, db in zip(draws_a, draws_b):
        assert np.array_equal(da, db)
    assert not np.array_equal(draws_a[0], draws_a[1])
    c = particle_rngs(seed=7, iteration=3, count=1)[0]
    assert not np.array_equal(draws_a[0], c.standard_normal(4))


def test_objectives_zero_rate_for_degenerate_set():
    prev = ParticleSet(np.array([[0.0]]))
    obj = estimate_objectives(
        prev, prev, awgn(), QuadraticCost(), 0.3, CHANNEL_CFG, 64,
        particle_rngs(0, 1, 1),
    )
    assert obj.rate == 0.0
    assert obj.cost == 0.0
    assert obj.lagrangian == 0.0


def test_objectives_identities():
    rng = np.random.default_rng(21)
    prev = ParticleSet(rng.normal(size=(6, 1)))
    obj = estimate_objectives(
        prev, prev, awgn(), QuadraticCost(), 0.0, CHANNEL_CFG, 128,
        particle_rngs(3, 1, 6),
    )
    assert obj.rate == -obj.lagrangian  # lam = 0
    assert obj.grad_norm >= 0.0

    values = np.array([1.0, 2.0])
    grads = np.array([[1.0, 0.0], [0.0, 2.0]])
    costs = np.array([3.0, 5.0])
    s = objective_summaries(values, grads, costs, lam=0.5)
    assert s.lagrangian == 1.5
    assert s.cost == 4.0
    assert s.rate == 0.5 * 4.0 - 1.5
    assert s.grad_norm == (1.0 + 4.0) / 2


def test_dimension_and_multiplier_validation():
    prev = ParticleSet(np.zeros((2, 2)))
    with pytest.raises(ConfigurationError):
        estimate_potential(
            np.zeros(2), prev, awgn(), QuadraticCost(), 0.1, CHANNEL_CFG, 16,
            np.random.default_rng(0),
        )
    prev1 = ParticleSet(np.zeros((2, 1)))
    with pytest.raises(ValueError):
        estimate_potential(
            np.zeros(1), prev1, awgn(), QuadraticCost(), -0.5, CHANNEL_CFG, 16,
            np.random.default_rng(0),
        )


def test_importance_config_validation():
    with pytest.raises(ConfigurationError):
        ImportanceConfig(kind="cauchy")
    with pytest.raises(ConfigurationError):
        ImportanceConfig(kind="gaussian", scale=0.0)
    with pytest.raises(ConfigurationError):
        ImportanceConfig(num_samples=0)
    cfg = ImportanceConfig(num_samples=None)
    assert cfg.resolved_samples(77) == 77
    assert ImportanceConfig(num_samples=12).resolved_samples(77) == 12
