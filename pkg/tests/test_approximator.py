"""Strategy construction: exact 1-d solver, partitions, budgets, covariance."""

import numpy as np
import pytest

from maxaffine import (
    Domain,
    PiecewiseAffineMax,
    STRATEGIES,
    WeightFunction,
    allocate_budget,
    build_approximation,
    catalog_entry,
    dp_1d_abscissas,
    exact_1d_optimal,
    is_circumscribed,
    max_violation,
    partition_domain,
    weighted_lp_error,
)
from maxaffine.approximator import (
    envelope_error_1d,
    optimal_tangent_abscissas_1d,
    quantile_abscissas,
    stationarity_residual_1d,
    tangent_crossings_1d,
)
from conftest import rng_for


# ---------------------------------------------------------------------------
# exact 1-d machinery


def test_optimal_abscissas_quadratic_are_uniform(quad_1d, w_const):
    t = optimal_tangent_abscissas_1d(quad_1d, w_const, 1.0, 4)
    np.testing.assert_allclose(t, [1 / 8, 3 / 8, 5 / 8, 7 / 8], atol=1e-12)
    t1 = optimal_tangent_abscissas_1d(quad_1d, w_const, 1.0, 1)
    np.testing.assert_allclose(t1, [0.5], atol=1e-9)
    t2 = optimal_tangent_abscissas_1d(quad_1d, w_const, 2.0, 8)
    np.testing.assert_allclose(t2, (np.arange(8) + 0.5) / 8.0, atol=1e-10)


def test_tangent_crossings_quadratic(quad_1d):
    b = tangent_crossings_1d(quad_1d, np.array([0.25, 0.75]))
    np.testing.assert_allclose(b, [0.5], rtol=1e-14)


def test_envelope_error_frozen_values(quad_1d, w_const):
    # Delta_1 = 1/(24 m^2) and Delta_2 = 1/(320 m^4) at the optimum
    for m, target in ((1, 1 / 24), (2, 1 / 96), (4, 1 / 384), (8, 1 / 1536)):
        t = optimal_tangent_abscissas_1d(quad_1d, w_const, 1.0, m)
        err = envelope_error_1d(quad_1d, w_const, 1.0, t, (0.0, 1.0))
        assert err == pytest.approx(target, rel=1e-12)
    t = optimal_tangent_abscissas_1d(quad_1d, w_const, 2.0, 2)
    err2 = envelope_error_1d(quad_1d, w_const, 2.0, t, (0.0, 1.0))
    assert err2 == pytest.approx(1.0 / 5120.0, rel=1e-12)


def test_stationarity_residual_vanishes_at_optimum(quad_1d, w_const):
    t = optimal_tangent_abscissas_1d(quad_1d, w_const, 1.0, 4)
    res = stationarity_residual_1d(quad_1d, w_const, 1.0, t, (0.0, 1.0))
    assert np.max(np.abs(res)) < 1e-12
    bad = t + np.array([0.02, -0.01, 0.0, 0.01])
    res_bad = stationarity_residual_1d(quad_1d, w_const, 1.0, bad, (0.0, 1.0))
    assert np.max(np.abs(res_bad)) > 1e-4


def test_dp_matches_newton_on_cosh(w_const):
    dom = Domain.box([-1.0], [1.0])
    f = catalog_entry("cosh_quadratic", {"eps": 0.3, "freq": 2.0}, dom)
    t_dp = dp_1d_abscissas(f, w_const, 6)
    t_full = optimal_tangent_abscissas_1d(f, w_const, 1.0, 6)
    np.testing.assert_allclose(t_dp, t_full, atol=2e-2)  # dp is the warm start
    res = stationarity_residual_1d(f, w_const, 1.0, t_full, (-1.0, 1.0))
    assert np.max(np.abs(res)) < 1e-9


def test_quantile_abscissas_interlace(quad_1d, w_exp):
    t = quantile_abscissas(quad_1d, w_exp, 1.0, 12)
    assert t.shape == (12,)
    assert np.all(np.diff(t) > 0)
    assert t[0] > 0.0 and t[-1] < 1.0


def test_exact_1d_weighted_ratio(w_exp, quad_1d):
    # the weighted solver must beat naive placements on its own objective
    t_opt = optimal_tangent_abscissas_1d(quad_1d, w_exp, 1.0, 6)
    err_opt = envelope_error_1d(quad_1d, w_exp, 1.0, t_opt, (0.0, 1.0))
    t_unif = (np.arange(6) + 0.5) / 6.0
    err_unif = envelope_error_1d(quad_1d, w_exp, 1.0, t_unif, (0.0, 1.0))
    assert err_opt <= err_unif + 1e-15
    res = stationarity_residual_1d(quad_1d, w_exp, 1.0, t_opt, (0.0, 1.0))
    assert np.max(np.abs(res)) < 1e-10


def test_exact_1d_huber_flat_pieces(w_const):
    dom = Domain.box([-1.0], [1.0])
    f = catalog_entry("huber", {"delta": 0.5}, dom)
    l = exact_1d_optimal(f, w_const, 1.0, 8)
    assert l.npieces <= 8
    x = np.linspace(-1, 1, 2001)[:, None]
    assert max_violation(f, l, x) <= 1e-12


def test_exact_1d_rejects_higher_dimensions(quad_2d, w_const):
    with pytest.raises(ValueError):
        build_approximation(quad_2d, w_const, 1.0, 4, "exact_1d")


# ---------------------------------------------------------------------------
# partition and budgets


def test_partition_tiles_the_box(quad_2d, w_const):
    part = partition_domain(quad_2d, w_const, 1.0, 6)
    assert len(part.cells) == 36  # 6 per axis on the unit square
    vols = np.array([np.prod(hi - lo) for lo, hi in part.cells])
    np.testing.assert_allclose(vols, part.volumes, rtol=1e-12)
    assert vols.sum() == pytest.approx(1.0, rel=1e-9)
    for (lo, hi), anchor in zip(part.cells, part.anchors):
        assert np.all(anchor > lo - 1e-12) and np.all(anchor < hi + 1e-12)
    assert not part.clipped


def test_partition_clips_on_ball(w_const):
    ball = Domain.ball([0.0, 0.0], 1.0)
    f = catalog_entry("quadratic", {}, ball)
    part = partition_domain(f, w_const, 1.0, 4)
    assert part.clipped
    assert ball.contains(part.anchors).all()


def test_allocation_floors_and_total(quad_2d, w_const):
    part = partition_domain(quad_2d, w_const, 1.0, 2)  # 4 cells
    for m in (4, 7, 16, 64):
        alloc = allocate_budget(part, quad_2d, w_const, 1.0, m)
        assert alloc.budgets.sum() == m
        assert np.all(alloc.budgets >= 1)
        floors = np.floor(alloc.masses * m).astype(int)
        assert floors.sum() <= m
        assert np.all(alloc.budgets >= floors)
    assert alloc.masses.sum() == pytest.approx(1.0, rel=1e-12)


def test_allocation_needs_enough_budget(quad_2d, w_const):
    part = partition_domain(quad_2d, w_const, 1.0, 3)  # 9 cells
    with pytest.raises(ValueError):
        allocate_budget(part, quad_2d, w_const, 1.0, 5)


# ---------------------------------------------------------------------------
# strategies


def test_uniform_grid_1d_hits_midpoints(quad_1d, w_const):
    l = build_approximation(quad_1d, w_const, 1.0, 4, "uniform_grid")
    rep = weighted_lp_error(quad_1d, l, 1.0, w_const)
    assert rep.value == pytest.approx(1.0 / 384.0, rel=1e-12)


def test_unknown_strategy_rejected(quad_1d, w_const):
    with pytest.raises(ValueError):
        build_approximation(quad_1d, w_const, 1.0, 4, "clever_trick")
    assert set(STRATEGIES) == {"paper_partition", "global_density",
                               "greedy_insertion", "uniform_grid", "exact_1d"}


@pytest.mark.parametrize("strategy", ["uniform_grid", "global_density",
                                      "greedy_insertion", "paper_partition"])
def test_strategies_build_circumscribed_envelopes_2d(strategy, quad_2d, w_const):
    l = build_approximation(quad_2d, w_const, 1.0, 9, strategy, seed=11)
    assert l.npieces <= 9
    pts = quad_2d.domain.sample(np.random.default_rng(0), 20_000)
    ok, worst = is_circumscribed(quad_2d, l, pts)
    assert ok, worst


def test_budget_is_respected_across_strategies(quad_2d, w_const):
    for strategy in ("uniform_grid", "global_density", "greedy_insertion",
                     "paper_partition"):
        for m in (1, 3, 10):
            l = build_approximation(quad_2d, w_const, 1.0, m, strategy, seed=5)
            assert 1 <= l.npieces <= m


def test_greedy_is_monotone_at_fixed_nodes(quad_2d, w_const):
    errs = []
    for m in (4, 8, 16):
        l = build_approximation(quad_2d, w_const, 1.0, m, "greedy_insertion",
                                seed=3, cloud_size=20_000)
        errs.append(weighted_lp_error(quad_2d, l, 1.0, w_const).value)
    assert errs[0] >= errs[1] >= errs[2]


def test_vertical_shift_equivariance(quad_2d, w_const):
    for strategy in ("uniform_grid", "global_density", "greedy_insertion",
                     "paper_partition"):
        l0 = build_approximation(quad_2d, w_const, 1.0, 6, strategy, seed=7)
        l1 = build_approximation(quad_2d.with_offset(2.5), w_const, 1.0, 6,
                                 strategy, seed=7)
        np.testing.assert_allclose(l1.offsets, l0.offsets + 2.5, atol=1e-12)
        np.testing.assert_allclose(l1.slopes, l0.slopes, atol=1e-12)


def test_exact_1d_shift_equivariance(quad_1d, w_const):
    l0 = build_approximation(quad_1d, w_const, 1.0, 5, "exact_1d")
    l1 = build_approximation(quad_1d.with_offset(-1.0), w_const, 1.0, 5,
                             "exact_1d")
    np.testing.assert_allclose(l1.offsets, l0.offsets - 1.0, atol=1e-12)


def test_diagonal_affine_covariance_of_construction(w_const):
    # x -> 2x maps [0, 1/2] onto [0, 1]; tangents transform contravariantly
    dom = Domain.box([0.0], [0.5])
    g = catalog_entry("quadratic", {"hessian": [[4.0]]}, dom)  # g(y)=f(2y)
    lf = build_approximation(
        catalog_entry("quadratic", {"hessian": [[1.0]]}, Domain.box([0.0], [1.0])),
        w_const, 1.0, 4, "exact_1d")
    lg = build_approximation(g, w_const, 1.0, 4, "exact_1d")
    t = np.array([[2.0]])
    y = np.linspace(0, 0.5, 101)[:, None]
    np.testing.assert_allclose(lg.evaluate(y), lf.compose_linear(t).evaluate(y),
                               atol=1e-13)


def test_paper_partition_accepts_piece_count(quad_2d, w_const):
    l = build_approximation(quad_2d, w_const, 1.0, 12, "paper_partition",
                            seed=1, l_pieces=3)
    assert l.npieces <= 12
    # an oversized grid request is coarsened until it fits the budget
    l2 = build_approximation(quad_2d, w_const, 1.0, 2, "paper_partition",
                             seed=1, l_pieces=5)
    assert 1 <= l2.npieces <= 2


def test_greedy_handles_m_equal_one(quad_2d, w_const):
    l = build_approximation(quad_2d, w_const, 1.0, 1, "greedy_insertion", seed=9)
    assert l.npieces == 1
    pts = quad_2d.domain.sample(np.random.default_rng(1), 1000)
    assert max_violation(quad_2d, l, pts) <= 1e-12


def test_strategies_work_on_ball_domain(w_const):
    ball = Domain.ball([0.0, 0.0], 1.0)
    f = catalog_entry("quadratic", {}, ball)
    for strategy in ("uniform_grid", "global_density", "paper_partition"):
        l = build_approximation(f, w_const, 1.0, 8, strategy, seed=2)
        pts = ball.sample(np.random.default_rng(3), 10_000)
        assert max_violation(f, l, pts) <= 1e-12
