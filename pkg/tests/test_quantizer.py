"""Lloyd quantizer: brute-force oracles, invariants, metric equivariance."""

import numpy as np
import pytest

from maxaffine import (
    Domain,
    MetricError,
    QuadraticForm,
    QuadratureSpec,
    QuantizerConfig,
    brute_force_1d,
    quantize,
    quantizer_objective,
    whiten,
)
from conftest import rng_for


def _uniform_objective_1d(points, p):
    """Exact distortion of sorted 1-d points against the uniform density.

    Voronoi cells are the midpoint intervals; each contributes
    ((t-l)^{2p+1} + (r-t)^{2p+1}) / (2p+1).
    """
    t = np.sort(np.asarray(points, dtype=float).ravel())
    edges = np.concatenate([[0.0], (t[1:] + t[:-1]) / 2.0, [1.0]])
    left = t - edges[:-1]
    right = edges[1:] - t
    q = 2.0 * p + 1.0
    return float(np.sum(left ** q + right ** q) / q)


def test_whiten_reproduces_metric():
    a = np.array([[4.0, 1.0], [1.0, 2.0]])
    w = whiten(QuadraticForm.from_matrix(a))
    np.testing.assert_allclose(w.T @ w, a, rtol=1e-14, atol=1e-14)


def test_brute_force_small_m_midpoints():
    np.testing.assert_allclose(brute_force_1d(1, 1.0).points.ravel(), [0.5],
                               atol=1e-4)
    np.testing.assert_allclose(brute_force_1d(2, 1.0).points.ravel(),
                               [0.25, 0.75], atol=1e-4)
    np.testing.assert_allclose(brute_force_1d(4, 2.0).points.ravel(),
                               [0.125, 0.375, 0.625, 0.875], atol=1e-4)
    with pytest.raises(ValueError):
        brute_force_1d(5, 1.0)
    with pytest.raises(ValueError):
        brute_force_1d(0, 1.0)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_brute_force_recovers_zador_constant(p):
    # the oracle behind the sweep theory: rescale the exact distortion of
    # the brute-force points and compare with 1/(2^{2p}(2p+1))
    m = 4
    ps = brute_force_1d(m, p)
    delta_hat = m ** (2.0 * p) * _uniform_objective_1d(ps.points, p)
    target = 1.0 / (2.0 ** (2 * p) * (2 * p + 1))
    assert delta_hat == pytest.approx(target, rel=1e-6)
    assert ps.objective == pytest.approx(_uniform_objective_1d(ps.points, p),
                                         rel=1e-10)


def test_quantize_uniform_interval_near_midpoints():
    dom = Domain.box([0.0], [1.0])
    ps = quantize(dom, None, QuantizerConfig(m=8, p=1.0, seed=0))
    pts = np.sort(ps.points.ravel())
    np.testing.assert_allclose(pts, (np.arange(8) + 0.5) / 8.0, atol=5e-3)
    assert ps.objective * 64.0 == pytest.approx(1.0 / 12.0, rel=5e-3)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
def test_objective_history_is_monotone(p):
    dom = Domain.box([0.0, 0.0], [1.0, 1.0])
    for i in range(3):
        cfg = QuantizerConfig(m=12, p=p, seed=i, max_iterations=40,
                              cloud_size=4000)
        ps = quantize(dom, None, cfg)
        h = np.asarray(ps.objective_history)
        assert np.all(np.diff(h) <= 1e-12 * h[:-1] + 1e-300)
        assert ps.objective == h[-1]
        assert ps.iterations_used >= 1


def test_objective_matches_distortion_of_returned_points():
    dom = Domain.box([0.0], [1.0])
    cloud = rng_for("obj-id", 0).random((4000, 1))
    for p in (1.0, 1.5, 2.0):
        cfg = QuantizerConfig(m=5, p=p, max_iterations=3)  # force non-converged
        ps = quantize(dom, None, cfg, _cloud=cloud)
        d = np.abs(cloud - ps.points.ravel()[None, :]).min(axis=1)
        assert ps.objective == pytest.approx(float(np.mean(d ** (2 * p))),
                                             rel=1e-12)


def test_points_stay_inside_closed_region():
    ball = Domain.ball([0.0, 0.0], 1.0)
    ps = quantize(ball, None, QuantizerConfig(m=16, seed=2, cloud_size=8000))
    norms = np.linalg.norm(ps.points, axis=1)
    assert np.all(norms <= 1.0 + 1e-12)

    box = Domain.box([0.0], [1.0])
    ps1 = quantize(box, None, QuantizerConfig(m=6, seed=3))
    assert ps1.points.min() >= 0.0 and ps1.points.max() <= 1.0


def test_restarts_only_improve():
    dom = Domain.box([0.0, 0.0], [1.0, 1.0])
    one = quantize(dom, None, QuantizerConfig(m=9, seed=5, restarts=1,
                                              cloud_size=6000))
    three = quantize(dom, None, QuantizerConfig(m=9, seed=5, restarts=3,
                                                cloud_size=6000))
    assert three.objective <= one.objective + 1e-15


def test_mirror_symmetry_of_seed_cloud():
    # mirroring the seed cloud mirrors the solution; the objective agrees
    dom = Domain.box([0.0], [1.0])
    # dyadic cloud so the reflection 1 - x is exact in floating point
    cloud = ((rng_for("mirror", 0).integers(0, 2 ** 20, size=(5000, 1)) * 2 + 1)
             / 2.0 ** 21)
    cfg = QuantizerConfig(m=7, p=1.0, seed=0, max_iterations=60)
    a = quantize(dom, None, cfg, _cloud=cloud)
    b = quantize(dom, None, cfg, _cloud=1.0 - cloud)
    assert b.objective == pytest.approx(a.objective, rel=1e-6)
    np.testing.assert_allclose(np.sort(1.0 - b.points.ravel()),
                               np.sort(a.points.ravel()), atol=1e-6)


def test_diagonal_metric_matches_rescaled_problem():
    # quantizing with metric diag(4, 1) == quantizing the x-doubled cloud
    # with the identity metric; with power-of-two scaling this is exact
    cloud = rng_for("metric", 1).random((3000, 2))
    dom = Domain.box([0.0, 0.0], [1.0, 1.0])
    dom_wide = Domain.box([0.0, 0.0], [2.0, 1.0])
    metric = QuadraticForm.from_matrix(np.diag([4.0, 1.0]))
    cfg_m = QuantizerConfig(m=6, seed=4, metric=metric, max_iterations=50)
    cfg_i = QuantizerConfig(m=6, seed=4, max_iterations=50)
    a = quantize(dom, None, cfg_m, _cloud=cloud)
    b = quantize(dom_wide, None, cfg_i, _cloud=cloud * np.array([2.0, 1.0]))
    np.testing.assert_array_equal(a.points * np.array([2.0, 1.0]), b.points)
    assert a.objective == b.objective


def test_metric_dimension_guard():
    dom = Domain.box([0.0], [1.0])
    metric = QuadraticForm.from_matrix(np.eye(2))
    with pytest.raises(MetricError):
        quantize(dom, None, QuantizerConfig(m=3, metric=metric))


def test_density_quantizer_concentrates_points():
    dom = Domain.box([0.0], [1.0])
    ps = quantize(dom, lambda x: 0.01 + (x[:, 0] > 0.5) * 1.0,
                  QuantizerConfig(m=10, seed=6))
    assert np.sum(ps.points.ravel() > 0.5) >= 7


def test_zero_density_raises():
    dom = Domain.box([0.0], [1.0])
    with pytest.raises(ValueError):
        quantize(dom, lambda x: np.zeros(x.shape[0]),
                 QuantizerConfig(m=3, seed=0))


def test_quantizer_objective_reports_match():
    dom = Domain.box([0.0], [1.0])
    pts = (np.arange(4)[:, None] + 0.5) / 4.0
    exact = _uniform_objective_1d(pts, 1.0)
    mc = quantizer_objective(dom, None, np.eye(1), 1.0, pts,
                             QuadratureSpec(kind="monte_carlo",
                                            samples=200_000, seed=8))
    assert mc.error_bar > 0
    assert mc.value == pytest.approx(exact, abs=5 * mc.error_bar)
    grid = quantizer_objective(dom, None, np.eye(1), 1.0, pts,
                               QuadratureSpec(kind="tensor_grid", level=512))
    assert grid.value == pytest.approx(exact, rel=1e-6)


def test_empty_cell_reseeding_recovers():
    # a tight duplicate cloud forces empty cells on the first assignments
    dom = Domain.box([0.0], [1.0])
    base = rng_for("empty", 0).random((50, 1))
    cloud = np.repeat(base, 40, axis=0)
    ps = quantize(dom, None, QuantizerConfig(m=16, seed=1, max_iterations=80),
                  _cloud=cloud)
    assert np.isfinite(ps.objective)
    # every returned point should sit on distinct mass
    assert np.unique(np.round(ps.points.ravel(), 9)).size >= 8
