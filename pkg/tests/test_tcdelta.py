import math

import numpy as np
import pytest

from idq.errors import DimensionMismatch
from idq.idrate import binary_entropy, binary_hamming_tc_oracle, id_rate_iid
from idq.sources import Pmf, bernoulli_pmf, discretize_gaussian
from idq.tcdelta import (
    Channel,
    DistortionMatrix,
    ba_step,
    brute_force_tc_oracle,
    component_tc_curve,
    distortion_matrix,
    mutual_information,
    solution_point,
    solve_tc_point,
    tc_curve,
    tc_sweep,
    triangle_similarity,
)


def bern_setup():
    pmf = bernoulli_pmf(0.5)
    gamma = distortion_matrix(pmf.support, pmf.support, "hamming")
    return pmf, gamma


def test_distortion_matrix_examples():
    _, g = bern_setup()
    assert g.gamma.tolist() == [[0.0, 1.0], [1.0, 0.0]]
    q = distortion_matrix([-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0])
    assert np.array_equal(q.gamma, q.gamma.T)
    assert np.all(np.diag(q.gamma) == 0.0)
    assert q.gamma[0, 2] == 4.0
    assert distortion_matrix([2.0], [2.0]).gamma.tolist() == [[0.0]]


def test_channel_validation():
    with pytest.raises(ValueError):
        Channel(np.array([[0.6, 0.5], [0.5, 0.5]]))
    with pytest.raises(ValueError):
        Channel(np.array([[-0.1, 1.1], [1.1, -0.1]]))


def test_ba_step_zero_slope_fixed_point():
    pmf, g = bern_setup()
    t = Pmf(pmf.support, np.array([0.3, 0.7]))
    ch, t2 = ba_step(pmf, t, g, 0.0)
    assert np.allclose(ch.q[:, 0], [0.3, 0.7])
    assert np.allclose(ch.q[:, 1], [0.3, 0.7])
    assert np.allclose(t2.probs, [0.3, 0.7])
    assert mutual_information(pmf, ch) == 0.0


def test_ba_step_large_slope_identity():
    pmf, g = bern_setup()
    t = Pmf(pmf.support, np.array([0.5, 0.5]))
    ch = None
    for _ in range(50):
        ch, t = ba_step(pmf, t, g, 50.0)
    assert np.allclose(ch.q, np.eye(2), atol=1e-10)
    assert mutual_information(pmf, ch) == pytest.approx(1.0, abs=1e-9)


def test_ba_step_columns_stochastic():
    rng = np.random.default_rng(3)
    x = np.sort(rng.standard_normal(17))
    p = rng.random(17)
    pmf = Pmf(x, p / p.sum())
    g = distortion_matrix(x, x)
    t = Pmf(x, np.full(17, 1.0 / 17))
    for s in (0.0, 0.5, 3.0):
        ch, t2 = ba_step(pmf, t, g, s)
        assert np.max(np.abs(ch.q.sum(axis=0) - 1.0)) <= 1e-12
        assert abs(t2.probs.sum() - 1.0) <= 1e-12


def test_mutual_information_cases():
    p = np.array([0.5, 0.5])
    assert mutual_information(p, np.array([[0.3, 0.3], [0.7, 0.7]])) == 0.0
    assert mutual_information(p, np.eye(2)) == 1.0
    bsc = np.array([[0.75, 0.25], [0.25, 0.75]])
    assert mutual_information(p, bsc) == pytest.approx(1.0 - binary_entropy(0.25), abs=1e-12)


def test_solve_zero_slope():
    pmf = discretize_gaussian(1.0, 6.0, 65)
    g = distortion_matrix(pmf.support, pmf.support)
    sol = solve_tc_point(pmf, g, 0.0)
    assert sol.rate == pytest.approx(0.0, abs=1e-12)
    assert sol.d_s == pytest.approx(0.0, abs=1e-12)
    assert sol.converged


def test_solution_invariants_recompute():
    pmf, g = bern_setup()
    sol = solve_tc_point(pmf, g, 1.2)
    assert sol.rate == pytest.approx(mutual_information(pmf, sol.channel), abs=1e-12)
    t = sol.channel.q @ pmf.probs
    e_prod = float(t @ (g.gamma @ pmf.probs))
    e_joint = float((sol.channel.q * pmf.probs[None, :] * g.gamma).sum())
    assert sol.d_s == pytest.approx(e_prod - e_joint, abs=1e-12)
    assert np.allclose(sol.code_marginal.probs, t)


def test_binary_solver_matches_closed_form():
    pmf, g = bern_setup()
    for q in (0.05, 0.2, 0.4):
        s = math.log((1.0 - q) / q)
        sol = solve_tc_point(pmf, g, s)
        d = sol.d_s
        assert sol.rate == pytest.approx(binary_hamming_tc_oracle(d), abs=1e-9)
        assert d == pytest.approx(0.5 - q, abs=1e-9)
        assert sol.lagrangian_rise <= 1e-12


def test_fixed_point_consistency():
    pmf, g = bern_setup()
    tol = 1e-9
    sol = solve_tc_point(pmf, g, 1.0, tol=tol)
    ch, t = ba_step(pmf, sol.code_marginal, g, 1.0)
    i2 = mutual_information(pmf, ch)
    e_prod = float(t.probs @ (g.gamma @ pmf.probs))
    e_joint = float((ch.q * pmf.probs[None, :] * g.gamma).sum())
    assert abs(i2 - sol.rate) <= 10 * tol
    assert abs((e_prod - e_joint) - sol.d_s) <= 10 * tol


def test_gaussian_point_above_iid_curve():
    pmf = discretize_gaussian(1.0, 8.0, 129)
    g = distortion_matrix(pmf.support, pmf.support)
    for s in (1.0, 3.0, 8.0):
        sol = solve_tc_point(pmf, g, s, tol=1e-8)
        d, r = solution_point(sol, "quadratic")
        assert r >= id_rate_iid(1.0, d) - 1e-9


def test_triangle_similarity_mappings():
    assert triangle_similarity(0.6, 0.1, "hamming") == pytest.approx(0.5)
    assert triangle_similarity(4.0, 1.0, "quadratic") == pytest.approx(1.0)
    assert triangle_similarity(1.0, 4.0, "quadratic") == 0.0


def test_tc_sweep_requires_sorted_nonnegative():
    pmf, g = bern_setup()
    with pytest.raises(ValueError):
        tc_sweep(pmf, g, [1.0, 0.5])
    with pytest.raises(ValueError):
        tc_sweep(pmf, g, [-1.0, 0.5])


def test_tc_curve_single_zero_slope():
    pmf, g = bern_setup()
    curve = tc_curve(pmf, g, [0.0])
    assert len(curve.points) == 1
    assert curve.points[0].d_id == pytest.approx(0.0, abs=1e-12)
    assert curve.points[0].rate == pytest.approx(0.0, abs=1e-12)


def test_tc_curve_bernoulli_monotone():
    pmf, g = bern_setup()
    curve = tc_curve(pmf, g, np.geomspace(0.05, 6.0, 50))
    assert np.all(np.diff(curve.rates) >= -1e-9)
    assert curve.d_ids.max() <= 0.5 + 1e-9
    # solver fixed points sit on the closed-form curve
    for p in curve.points[::7]:
        assert p.rate == pytest.approx(binary_hamming_tc_oracle(p.d_id), abs=1e-6)


def test_warm_start_pruning_keeps_contract():
    pmf = discretize_gaussian(1.0, 6.0, 65)
    g = distortion_matrix(pmf.support, pmf.support)
    t0 = np.full(65, 1.0 / 63)
    t0[0] = t0[-1] = 0.0  # dead rows must stay dead and keep columns stochastic
    sol = solve_tc_point(pmf, g, 2.0, t0=t0 / t0.sum())
    assert sol.code_marginal.probs[0] == 0.0
    assert sol.code_marginal.probs[-1] == 0.0
    assert np.max(np.abs(sol.channel.q.sum(axis=0) - 1.0)) <= 1e-12


def test_brute_force_zero_budget():
    pmf, g = bern_setup()
    assert brute_force_tc_oracle(pmf, g, 0.0, 0.01) == pytest.approx(0.0, abs=1e-12)


def test_brute_force_full_budget():
    pmf, g = bern_setup()
    d = brute_force_tc_oracle(pmf, g, 1.0, 0.01)
    assert d == pytest.approx(0.5, abs=1e-12)


def test_brute_force_quarter_point():
    pmf, g = bern_setup()
    step = 0.01
    d = brute_force_tc_oracle(pmf, g, 1.0 - binary_entropy(0.25), step)
    assert abs(d - 0.25) <= 2 * step


def test_solver_matches_brute_force_at_budgets():
    # the iterative solver and the exhaustive search agree on achieved D_s
    pmf, g = bern_setup()
    step = 0.01
    sols = [solve_tc_point(pmf, g, s) for s in np.geomspace(0.05, 6.0, 60)]
    rates = np.array([s.rate for s in sols])
    dvals = np.array([s.d_s for s in sols])
    order = np.argsort(rates)
    for budget in (0.1, 0.25, 0.5, 0.75):
        d_solver = float(np.interp(budget, rates[order], dvals[order]))
        d_brute = brute_force_tc_oracle(pmf, g, budget, step)
        assert abs(d_solver - d_brute) <= max(1e-3, 3 * step)


def test_brute_force_validation():
    pmf, g = bern_setup()
    with pytest.raises(ValueError):
        brute_force_tc_oracle(pmf, g, 0.5, 0.1)  # step too coarse
    p4 = np.full(4, 0.25)
    g4 = distortion_matrix(np.arange(4.0), np.arange(4.0), "hamming")
    with pytest.raises(ValueError):
        brute_force_tc_oracle(p4, g4, 0.5, 0.01)


def test_component_curve_single_equals_tc_curve():
    pmf = discretize_gaussian(1.0, 6.0, 65)
    g = distortion_matrix(pmf.support, pmf.support)
    s_grid = np.geomspace(0.5, 20.0, 8)
    a = tc_curve(pmf, g, s_grid, tol=1e-8)
    b = component_tc_curve([(pmf, g)], s_grid, tol=1e-8)
    assert np.allclose(a.d_ids, b.d_ids)
    assert np.allclose(a.rates, b.rates)


def test_component_curve_equal_variances_symmetric():
    pmf = discretize_gaussian(1.0, 6.0, 65)
    g = distortion_matrix(pmf.support, pmf.support)
    s_grid = np.geomspace(0.5, 20.0, 6)
    one = tc_curve(pmf, g, s_grid, tol=1e-8)
    two = component_tc_curve([(pmf, g), (pmf, g)], s_grid, tol=1e-8)
    assert np.allclose(one.d_ids, two.d_ids)
    assert np.allclose(one.rates, two.rates)


def test_dimension_checks():
    pmf, g = bern_setup()
    with pytest.raises(DimensionMismatch):
        solve_tc_point(np.array([0.5, 0.25, 0.25]), g, 1.0)
    with pytest.raises(DimensionMismatch):
        ba_step(pmf, Pmf(np.arange(3.0), np.full(3, 1 / 3)), g, 1.0)


def test_ba_step_underflow_detection():
    from idq.errors import NumericalUnderflow

    # all marginal mass sits on a codeword whose exponent underflows to zero
    # in the first column, so that column cannot be normalized
    p = np.array([0.5, 0.5])
    gamma = np.array([[0.0, 1.0], [10_000.0, 9_801.0]])
    t = np.array([0.0, 1.0])
    with pytest.raises(NumericalUnderflow):
        ba_step(p, t, gamma, 1.0)
