"""Distortion-constrained particle solver and its (R, D) readout."""

from dataclasses import replace

import numpy as np
import pytest

from ccwgd.core import (
    ConfigurationError,
    GaussianInit,
    ParticleSet,
    PointInit,
    SolverConfig,
    StepSchedule,
    init_particles,
)
from ccwgd.rd import (
    RDProblem,
    SquaredErrorDistortion,
    rd_first_variation_grad,
    rd_readout,
    rd_solve,
)
from ccwgd.theory import gaussian_rd_rate
from ccwgd.wgd import SolveAbort
from ccwgd.diagnostics import grad_check


def _gauss_problem(lam, n_source=2000, seed=0):
    src = np.random.default_rng(seed).normal(size=(n_source, 1))
    return RDProblem(source=src, distortion=SquaredErrorDistortion(), lam=lam)


def _solver(**kw):
    base = dict(num_particles=24, max_iters=200, seed=5,
                step=StepSchedule(kind="polynomial", tau0=0.2, decay=0.7), grad_tol=0.0)
    base.update(kw)
    return SolverConfig(**base)


def test_squared_error_distortion_and_gradient():
    d = SquaredErrorDistortion()
    x = np.array([[1.0, 2.0]])
    y = np.array([[0.0, 0.0]])
    np.testing.assert_allclose(d.distortion(x, y), [5.0])
    np.testing.assert_allclose(d.grad_y_distortion(x, y), [[-2.0, -4.0]])
    pairs = list(zip(np.random.default_rng(0).normal(size=(6, 2)),
                     np.random.default_rng(1).normal(size=(6, 2))))
    assert grad_check(d, pairs) <= 1e-5


def test_problem_validation():
    with pytest.raises(ConfigurationError):
        RDProblem(source=np.array([[np.inf]]), distortion=SquaredErrorDistortion(), lam=1.0)
    with pytest.raises(ConfigurationError):
        RDProblem(source=np.ones((3, 1)), distortion=SquaredErrorDistortion(), lam=-1.0)
    p = RDProblem(source=np.ones(5), distortion=SquaredErrorDistortion(), lam=1.0)
    assert p.source.shape == (5, 1) and p.dim == 1


def test_gradient_matches_weighted_mean_definition():
    rng = np.random.default_rng(3)
    problem = RDProblem(source=rng.normal(size=(40, 2)), distortion=SquaredErrorDistortion(), lam=1.5)
    recon = ParticleSet(rng.normal(size=(7, 2)))
    got = rd_first_variation_grad(recon.points, problem, recon)

    # plain-loop re-derivation of lam * E_w[grad_y d]
    lam = problem.lam
    for j in range(7):
        acc = np.zeros(2)
        for i in range(40):
            z = np.mean([np.exp(-lam * np.sum((problem.source[i] - recon.points[m]) ** 2))
                         for m in range(7)])
            w = np.exp(-lam * np.sum((problem.source[i] - recon.points[j]) ** 2)) / z
            acc += w * 2.0 * (recon.points[j] - problem.source[i])
        np.testing.assert_allclose(got[j], lam * acc / 40, rtol=1e-10)

    single = rd_first_variation_grad(recon.points[3], problem, recon)
    np.testing.assert_allclose(single, got[3], rtol=1e-15)


def test_single_recon_particle_closed_form():
    rng = np.random.default_rng(11)
    src = rng.normal(size=(300, 1))
    problem = RDProblem(source=src, distortion=SquaredErrorDistortion(), lam=0.8)
    recon = ParticleSet(np.array([[0.4]]))
    grad = rd_first_variation_grad(np.array([0.4]), problem, recon)
    np.testing.assert_allclose(grad, 2 * 0.8 * (0.4 - src.mean()), rtol=1e-12)

    rate, dist = rd_readout(problem, recon)
    assert rate == 0.0
    np.testing.assert_allclose(dist, np.mean((src - 0.4) ** 2), rtol=1e-12)


def test_zero_slope_moves_nothing():
    problem = _gauss_problem(lam=0.0, n_source=100)
    solver = _solver(max_iters=120, grad_tol=1e-12)
    result = rd_solve(problem, solver)
    assert result.stop_reason == "grad_tol"
    assert result.iterations == 50
    # the gradient vanishes identically, so the cloud never moves
    init = init_particles(replace(solver, init=GaussianInit(dim=1)),
                          np.random.default_rng(np.random.SeedSequence((solver.seed, 0))))
    assert np.array_equal(result.particles.points, init.points)
    assert result.rate == 0.0
    d = SquaredErrorDistortion().distortion(problem.source[:, None, :], init.points[None, :, :])
    np.testing.assert_allclose(result.distortion, d.mean(), rtol=1e-12)


def test_rate_nonnegative_across_random_configs():
    rng = np.random.default_rng(9)
    for _ in range(5):
        problem = RDProblem(source=rng.normal(size=(50, 2)),
                            distortion=SquaredErrorDistortion(),
                            lam=float(rng.uniform(0, 3)))
        recon = ParticleSet(rng.normal(size=(6, 2)))
        rate, dist = rd_readout(problem, recon)
        assert rate >= 0.0 and dist >= 0.0


def test_readout_invariant_under_source_shuffle():
    # only summation order changes, so agreement should be near machine level
    rng = np.random.default_rng(4)
    src = rng.normal(size=(300, 2))
    problem = RDProblem(source=src, distortion=SquaredErrorDistortion(), lam=1.3)
    recon = ParticleSet(rng.normal(size=(10, 2)))
    rate, dist = rd_readout(problem, recon)
    shuffled = RDProblem(source=src[rng.permutation(300)],
                         distortion=SquaredErrorDistortion(), lam=1.3)
    rate_s, dist_s = rd_readout(shuffled, recon)
    np.testing.assert_allclose(rate_s, rate, rtol=1e-12)
    np.testing.assert_allclose(dist_s, dist, rtol=1e-12)


def test_solve_is_deterministic():
    problem = _gauss_problem(lam=2.0, n_source=400)
    a = rd_solve(problem, _solver(max_iters=60))
    b = rd_solve(problem, _solver(max_iters=60))
    assert np.array_equal(a.particles.points, b.particles.points)
    assert a.trace == b.trace
    assert (a.rate, a.distortion) == (b.rate, b.distortion)


def test_trace_records_are_valid():
    problem = _gauss_problem(lam=1.0, n_source=200)
    result = rd_solve(problem, _solver(max_iters=40, trace_stride=4))
    iters = [r.iteration for r in result.trace]
    assert iters[0] == 1 and all(i == 1 or i % 4 == 0 for i in iters)
    for r in result.trace:
        assert r.lam == 1.0 and r.rate >= 0.0 and r.distortion >= 0.0


@pytest.mark.filterwarnings("ignore:overflow encountered", "ignore:divide by zero")
def test_far_init_underflow_aborts():
    # recon so remote the squared distance overflows: partition mass is zero
    problem = _gauss_problem(lam=5.0, n_source=50)
    solver = _solver(init=PointInit(np.array([[1e200]])), num_particles=1)
    with pytest.raises(SolveAbort) as err:
        rd_solve(problem, solver)
    assert "underflow" in str(err.value)
    assert err.value.trace == []


def test_gaussian_source_approaches_reference_curve():
    # slope 2 on a unit Gaussian: the reference curve touches this slope at
    # D = 1/(2 lam) = 0.25, R = 0.5 log(1/D)
    problem = _gauss_problem(lam=2.0, n_source=4000, seed=1)
    solver = SolverConfig(num_particles=64, max_iters=600, seed=2,
                          step=StepSchedule(kind="polynomial", tau0=0.2, decay=0.7),
                          grad_tol=0.0)
    result = rd_solve(problem, solver)
    assert abs(result.distortion - 0.25) < 0.05
    assert result.rate >= gaussian_rd_rate(result.distortion) - 0.05
    assert abs(result.rate - gaussian_rd_rate(result.distortion)) < 0.1
