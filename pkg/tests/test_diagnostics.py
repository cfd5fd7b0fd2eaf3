"""Transport distance, gradient checker, and particle clustering."""

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from ccwgd.core import CostModel, ParticleSet, QuadraticCost
from ccwgd.diagnostics import cluster_particles, grad_check, w2_1d


def test_w2_1d_hand_value():
    assert w2_1d([0.0, 1.0], [1.0, 2.0]) == pytest.approx(1.0)
    assert w2_1d([3.0, 1.0, 2.0], [2.0, 3.0, 1.0]) == 0.0


def test_w2_1d_matches_optimal_assignment():
    rng = np.random.default_rng(4)
    for _ in range(5):
        a = rng.normal(size=9)
        b = rng.normal(size=9) * 2 + 1
        costs = (a[:, None] - b[None, :]) ** 2
        rows, cols = linear_sum_assignment(costs)
        expected = np.sqrt(costs[rows, cols].mean())
        assert w2_1d(a, b) == pytest.approx(expected, rel=1e-12)


def test_w2_1d_metric_axioms():
    rng = np.random.default_rng(8)
    for _ in range(20):
        a, b, c = rng.normal(size=(3, 7))
        dab, dba = w2_1d(a, b), w2_1d(b, a)
        assert dab == dba >= 0.0
        assert w2_1d(a, a) == 0.0
        assert dab <= w2_1d(a, c) + w2_1d(c, b) + 1e-12


def test_w2_1d_rejects_bad_sizes():
    with pytest.raises(ValueError):
        w2_1d([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        w2_1d([], [])


def test_grad_check_accepts_correct_and_flags_wrong():
    xs = np.random.default_rng(0).normal(size=(5, 3))
    assert grad_check(QuadraticCost(), list(xs)) <= 1e-9

    class SkewedCost(CostModel):
        def cost(self, x):
            return np.sum(np.asarray(x) ** 2, axis=-1)

        def grad_cost(self, x):
            return 2.02 * np.asarray(x)  # 1% off

    assert grad_check(SkewedCost(), list(xs)) > 1e-3
    with pytest.raises(TypeError):
        grad_check(object(), [])


def test_cluster_two_blobs():
    rng = np.random.default_rng(6)
    blob_a = rng.normal(size=(30, 1)) * 0.01 + 2.0
    blob_b = rng.normal(size=(10, 1)) * 0.01 - 2.0
    ps = ParticleSet(np.vstack([blob_b, blob_a]))  # minority blob first
    clusters = cluster_particles(ps, radius=0.5)
    assert len(clusters) == 2
    centers = [float(c[0][0]) for c in clusters]
    masses = [c[1] for c in clusters]
    assert masses == sorted(masses, reverse=True)
    assert abs(centers[0] - 2.0) < 0.05 and masses[0] == pytest.approx(0.75)
    assert abs(centers[1] + 2.0) < 0.05 and masses[1] == pytest.approx(0.25)


def test_cluster_tight_cloud_is_single():
    rng = np.random.default_rng(7)
    ps = ParticleSet(rng.normal(size=(50, 2)) * 1e-4)
    clusters = cluster_particles(ps, radius=0.1)
    assert len(clusters) == 1
    assert clusters[0][1] == 1.0
    np.testing.assert_allclose(clusters[0][0], ps.points.mean(axis=0), rtol=1e-12)


def test_cluster_masses_sum_to_one_and_validate():
    rng = np.random.default_rng(11)
    ps = ParticleSet(rng.normal(size=(23, 3)))
    clusters = cluster_particles(ps, radius=0.8)
    assert sum(c[1] for c in clusters) == pytest.approx(1.0)
    again = cluster_particles(ps, radius=0.8)
    for (c1, m1), (c2, m2) in zip(clusters, again):
        assert np.array_equal(c1, c2) and m1 == m2
    with pytest.raises(ValueError):
        cluster_particles(ps, radius=0.0)
