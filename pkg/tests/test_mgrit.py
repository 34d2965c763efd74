import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_space_time
from wmgrit.mgrit import (
    RelaxationSpec,
    apply_space_time,
    build_hierarchy,
    c_relax_weighted,
    coarse_correct,
    convergence_rate,
    f_relax,
    family_defaults,
    forward_solve,
    initial_guess,
    largest_valid_nt,
    relax,
    residual,
    restrict_residual,
    sequential_solve,
    solve,
    v_cycle,
)
from wmgrit.oracle import dense_step_matrix, dense_two_level_error_op, unweighted_two_level_cycle
from wmgrit.problems import build_heat1d, build_problem


def _two_level(p, m=2, **kw):
    return build_hierarchy(p, m, max_levels=2, **kw)


def _random_state(p, rng):
    g = p.rhs()
    u = rng.normal(size=(p.nt, p.nx))
    u[0] = g[0]
    return u, g


def _f_rows(nt, m):
    return np.array([j for j in range(1, nt) if j % m])


# -- hierarchy --------------------------------------------------------------------------


def test_full_hierarchy_sizes_for_4097():
    hier = build_hierarchy(build_heat1d(3, 4097), 2)
    assert hier.sizes == [4097, 2049, 1025, 513, 257, 129, 65, 33, 17, 9, 5, 3]
    assert len(hier) == 12


def test_hierarchy_time_steps_scale_by_m():
    p = build_heat1d(3, 65)
    hier = build_hierarchy(p, 4)
    for fine, coarse in zip(hier.levels, hier.levels[1:]):
        assert coarse.nt == (fine.nt - 1) // 4 + 1
        assert coarse.dt == pytest.approx(4 * fine.dt, rel=1e-15)
        assert coarse.step_op.dt == pytest.approx(coarse.dt, rel=1e-15)
    assert hier.levels[-1].nt <= 4 and hier.levels[-1].m is None


def test_max_levels_two_ignores_coarsest_max():
    hier = build_hierarchy(build_heat1d(3, 4097), 2, max_levels=2)
    assert hier.sizes == [4097, 2049]


def test_hierarchy_stops_when_fewer_than_m_intervals_remain():
    hier = build_hierarchy(build_heat1d(3, 32769), 16)
    assert hier.sizes == [32769, 2049, 129, 9]


def test_non_divisible_nt_rejected_with_suggestion():
    with pytest.raises(ValueError, match=r"not divisible by m = 4.*largest valid nt <= 10 is 9"):
        build_hierarchy(build_heat1d(3, 10), 4)


@pytest.mark.parametrize("m", [1, 2.5])
def test_bad_coarsening_factor(m):
    with pytest.raises(ValueError):
        build_hierarchy(build_heat1d(3, 9), m)


@settings(max_examples=40, deadline=None)
@given(nt=st.integers(6, 3000), m=st.integers(2, 8))
def test_largest_valid_nt_builds(nt, m):
    n = largest_valid_nt(nt, m)
    assert n <= nt
    if n > 4:
        build_hierarchy(build_heat1d(2, n), m)


def test_family_defaults():
    assert family_defaults(build_heat1d(3, 5))["tol_scale"] == 1e-10
    adv = family_defaults(build_problem("adv1d-upwind", 3, 5))
    assert adv == {"tol_scale": 1e-8, "max_iters": 70, "rate_method": "geometric-overall"}


# -- relaxation -------------------------------------------------------------------------


def test_relaxation_spec_validation():
    with pytest.raises(ValueError):
        RelaxationSpec("FCFF")
    with pytest.raises(ValueError):
        RelaxationSpec("FCF", wc=(0.0,))
    with pytest.raises(ValueError):
        RelaxationSpec("FCFCF", wc=(1.0,), wcc=(-1.0,))
    spec = RelaxationSpec("fcf", wc=(1.0, 2.0))
    assert spec.pattern == "FCF"
    assert spec.weights(0)[0] == 1.0 and spec.weights(5)[0] == 2.0


def test_f_relax_zeroes_f_point_residuals(tiny_problem, rng):
    p = tiny_problem
    level = _two_level(p, 4).levels[0]
    u, g = _random_state(p, rng)
    f_relax(level, u, g)
    r = residual(level, u, g)
    assert np.max(np.abs(r[_f_rows(p.nt, 4)])) <= 1e-12 * np.linalg.norm(g)


def test_f_relax_matches_sequential_loop_over_one_interval(rng):
    p = build_heat1d(5, 5)
    level = _two_level(p, 4).levels[0]
    u, g = _random_state(p, rng)
    expected = u.copy()
    for j in (1, 2, 3):
        expected[j] = level.step_op.apply(expected[j - 1]) + g[j]
    f_relax(level, u, g)
    np.testing.assert_allclose(u[:4], expected[:4], rtol=1e-14, atol=1e-14)


def test_f_relax_fixed_point(tiny_problem):
    p = tiny_problem
    level = _two_level(p).levels[0]
    g = p.rhs(level.step_op)
    exact = forward_solve(level.step_op, g)
    u = f_relax(level, exact.copy(), g)
    np.testing.assert_allclose(u, exact, rtol=1e-14, atol=1e-15)


def test_c_relax_weight_one_is_block_jacobi(tiny_heat, rng):
    level = _two_level(tiny_heat).levels[0]
    u, g = _random_state(tiny_heat, rng)
    before = u.copy()
    c_relax_weighted(level, u, g, 1.0)
    for j in range(2, tiny_heat.nt, 2):
        np.testing.assert_allclose(u[j], level.step_op.apply(before[j - 1]) + g[j], rtol=1e-14, atol=1e-15)
    np.testing.assert_array_equal(u[0], before[0])


def test_c_relax_weight_zero_is_bitwise_noop(tiny_heat, rng):
    level = _two_level(tiny_heat).levels[0]
    u, g = _random_state(tiny_heat, rng)
    before = u.copy()
    c_relax_weighted(level, u, g, 0.0)
    np.testing.assert_array_equal(u, before)


def test_c_relax_weighted_matches_dense_jacobi(tiny_heat, rng):
    # u_C <- u_C + w (g - A u)_C with A the assembled space-time matrix
    p = tiny_heat
    level = _two_level(p).levels[0]
    u, g = _random_state(p, rng)
    a = dense_space_time(p)
    r = g.ravel() - a @ u.ravel()
    expected = u.ravel().copy()
    nx = p.nx
    for j in range(2, p.nt, 2):
        expected[j * nx : (j + 1) * nx] += 1.3 * r[j * nx : (j + 1) * nx]
    c_relax_weighted(level, u, g, 1.3)
    np.testing.assert_allclose(u.ravel(), expected, rtol=1e-13, atol=1e-14)


def test_fcf_weight_one_matches_sequential_row_updates(tiny_problem, rng):
    p = tiny_problem
    level = _two_level(p).levels[0]
    u, g = _random_state(p, rng)
    phi = dense_step_matrix(level.step_op)
    expected = u.copy()
    for sweep in ("F", "C", "F"):
        for j in range(1, p.nt):
            if (j % 2 == 0) == (sweep == "C"):
                expected[j] = phi @ expected[j - 1] + g[j]
    relax(level, u, g, RelaxationSpec("FCF", wc=(1.0,)))
    np.testing.assert_allclose(u, expected, rtol=1e-13, atol=1e-13)


def test_fcfcf_unit_weights_is_two_fc_sweeps(tiny_problem, rng):
    level = _two_level(tiny_problem).levels[0]
    u, g = _random_state(tiny_problem, rng)
    manual = u.copy()
    for _ in range(2):
        f_relax(level, manual, g)
        c_relax_weighted(level, manual, g, 1.0)
    f_relax(level, manual, g)
    relax(level, u, g, RelaxationSpec("FCFCF", wc=(1.0,), wcc=(1.0,)))
    np.testing.assert_array_equal(u, manual)


@pytest.mark.parametrize("pattern", ["F", "FCF", "FCFCF"])
def test_relax_ends_with_zero_f_residuals(pattern, tiny_problem, rng):
    p = tiny_problem
    level = _two_level(p).levels[0]
    u, g = _random_state(p, rng)
    relax(level, u, g, RelaxationSpec(pattern, wc=(1.4,), wcc=(0.7,)))
    r = residual(level, u, g)
    assert np.max(np.abs(r[_f_rows(p.nt, 2)])) <= 1e-12 * np.linalg.norm(g)
    np.testing.assert_array_equal(u[0], g[0])


# -- transfer and cycling -----------------------------------------------------------------


def test_apply_space_time_matches_dense(tiny_problem, rng):
    p = tiny_problem
    op = p.step_operator()
    u = rng.normal(size=(p.nt, p.nx))
    np.testing.assert_allclose(apply_space_time(op, u).ravel(), dense_space_time(p) @ u.ravel(), rtol=1e-13, atol=1e-14)


def test_restriction_matches_dense(rng):
    p = build_heat1d(3, 5)
    hier = _two_level(p)
    fine, coarse = hier.levels
    u, g = _random_state(p, rng)
    g_c, u_c = restrict_residual(fine, coarse, u, g)
    r = (g.ravel() - dense_space_time(p) @ u.ravel()).reshape(p.nt, p.nx)
    b = dense_space_time(p, dt=2 * p.dt)
    expected = r[::2].ravel() + b @ u[::2].ravel()
    np.testing.assert_allclose(g_c.ravel(), expected, rtol=1e-13, atol=1e-13)
    np.testing.assert_array_equal(u_c, u[::2])


def test_restriction_of_exact_solution_is_coarse_fixed_point(tiny_problem):
    p = tiny_problem
    fine, coarse = _two_level(p).levels
    g = p.rhs(fine.step_op)
    exact = forward_solve(fine.step_op, g)
    g_c, u_c = restrict_residual(fine, coarse, exact, g)
    np.testing.assert_allclose(forward_solve(coarse.step_op, g_c), u_c, rtol=1e-12, atol=1e-12)


def test_restriction_is_linear_in_residual(tiny_heat, rng):
    fine, coarse = _two_level(tiny_heat).levels
    u = np.zeros((tiny_heat.nt, tiny_heat.nx))
    g = rng.normal(size=u.shape)
    g1, _ = restrict_residual(fine, coarse, u, g)
    g2, _ = restrict_residual(fine, coarse, u, 2.5 * g)
    np.testing.assert_allclose(g2, 2.5 * g1, rtol=1e-14)


def test_coarse_correct_with_exact_c_values_gives_exact_state(tiny_problem, rng):
    p = tiny_problem
    fine = _two_level(p).levels[0]
    g = p.rhs(fine.step_op)
    exact = forward_solve(fine.step_op, g)
    u, _ = _random_state(p, rng)
    coarse_correct(fine, u, g, exact[::2].copy())
    np.testing.assert_allclose(u, exact, rtol=1e-10, atol=1e-10)


def test_coarse_correct_with_unchanged_c_values_is_f_relax(tiny_heat, rng):
    fine = _two_level(tiny_heat).levels[0]
    u, g = _random_state(tiny_heat, rng)
    expected = f_relax(fine, u.copy(), g)
    coarse_correct(fine, u, g, u[::2].copy())
    np.testing.assert_array_equal(u, expected)


@pytest.mark.parametrize("pattern, wc", [("FCF", 1.3), ("FCF", 0.6), ("FCFCF", 1.7), ("F", 1.0)])
def test_two_level_cycle_matches_dense_error_propagator(pattern, wc, tiny_heat, rng):
    p = tiny_heat
    spec = RelaxationSpec(pattern, wc=(wc,), wcc=(0.9,))
    hier = _two_level(p)
    g = p.rhs(hier.levels[0].step_op)
    exact = forward_solve(hier.levels[0].step_op, g)
    u, _ = _random_state(p, rng)
    e0 = (u - exact).ravel()
    v_cycle(hier, u, g, spec)
    e1 = (u - exact).ravel()
    np.testing.assert_allclose(e1, dense_two_level_error_op(p, 2, spec) @ e0, rtol=1e-10, atol=1e-10)


def test_v_cycle_leaves_zero_f_residuals_on_multilevel(tiny_problem, rng):
    p = build_problem(tiny_problem.label, 4, 17)
    hier = build_hierarchy(p, 2)
    u, g = _random_state(p, rng)
    v_cycle(hier, u, g, RelaxationSpec("FCF", wc=(1.5,)))
    r = residual(hier.levels[0], u, g)
    assert np.max(np.abs(r[_f_rows(p.nt, 2)])) <= 1e-12 * np.linalg.norm(g)
    np.testing.assert_array_equal(u[0], g[0])


# -- drivers ----------------------------------------------------------------------------


def test_sequential_solve_residual(tiny_problem):
    p = tiny_problem
    u = sequential_solve(p)
    g = p.rhs()
    r = residual(_two_level(p).levels[0], u, g)
    assert np.linalg.norm(r) <= 1e-12 * np.linalg.norm(g)


def test_initial_guess_is_seeded_uniform():
    p = build_heat1d(4, 9)
    g0 = p.initial_condition
    u = initial_guess(p, g0, 7)
    np.testing.assert_array_equal(u[0], g0)
    assert np.all((u[1:] >= 0) & (u[1:] < 1))
    expected = np.random.default_rng(7).random((9, 4))
    np.testing.assert_array_equal(u[1:], expected[1:])


@pytest.mark.parametrize("pid", ["heat1d", "adv1d-central", "adv1d-upwind"])
def test_exact_coarse_operator_converges_in_one_iteration(pid):
    p = build_problem(pid, 8, 33)
    rep = solve(p, m=2, levels=2, coarse_op="exact", tol_scale=0.0, max_iters=1)
    assert rep.residual_history[1] <= 1e-10 * rep.residual_history[0]


@pytest.mark.parametrize("wc", [0.5, 1.0, 1.7])
def test_two_level_fcf_is_exact_after_nc_minus_one_cycles(wc):
    # the C-point propagator is strictly lower triangular of size nc
    p = build_heat1d(6, 17)
    rep = solve(p, m=2, levels=2, spec=RelaxationSpec("FCF", wc=(wc,)), tol_scale=0.0, max_iters=8)
    assert rep.iterations <= 8
    assert rep.residual_history[-1] <= 1e-10 * rep.residual_history[0]


def test_unit_weight_fcf_is_exact_after_quarter_cycles():
    p = build_heat1d(6, 17)
    rep = solve(p, m=2, levels=2, tol_scale=0.0, max_iters=4)
    assert rep.iterations <= 4
    assert rep.residual_history[-1] <= 1e-10 * rep.residual_history[0]


@pytest.mark.parametrize("pid", ["heat1d", "adv1d-central"])
def test_unit_weight_matches_independent_cycle(pid):
    p = build_problem(pid, 6, 33)
    iterates = []
    solve(p, m=2, levels=2, max_iters=6, tol_scale=0.0, callback=lambda k, u: iterates.append(u.copy()))
    g = p.rhs()
    u = iterates[0]
    for k in range(1, len(iterates)):
        u = unweighted_two_level_cycle(p, 2, u, g)
        scale = np.linalg.norm(iterates[k])
        assert np.linalg.norm(u - iterates[k]) <= 1e-12 * scale


def test_converged_solution_matches_sequential():
    p = build_heat1d(15, 129)
    rep = solve(p, m=2, levels=0, keep_solution=True)
    assert rep.converged
    err = np.linalg.norm(rep.solution - sequential_solve(p))
    assert err <= 10 * rep.tolerance


def test_solve_is_deterministic():
    p = build_problem("adv1d-central", 32, 65)
    a = solve(p, m=2, seed=5, spec=RelaxationSpec("FCF", wc=(1.5,)))
    b = solve(p, m=2, seed=5, spec=RelaxationSpec("FCF", wc=(1.5,)))
    assert a.residual_history == b.residual_history
    c = solve(p, m=2, seed=6, spec=RelaxationSpec("FCF", wc=(1.5,)))
    assert c.residual_history != a.residual_history


@pytest.mark.parametrize("pid", ["heat1d", "adv1d-central", "adv1d-upwind"])
@pytest.mark.parametrize("pattern", ["FCF", "FCFCF"])
def test_converged_reports_have_geometric_rate_below_one(pid, pattern):
    p = build_problem(pid, 32, 129)
    rep = solve(p, m=2, spec=RelaxationSpec(pattern, wc=(1.2,), wcc=(0.9,)), **family_defaults(p))
    assert rep.converged
    assert convergence_rate(rep.residual_history, "geometric-overall") < 1
    assert len(rep.residual_history) == rep.iterations + 1


def test_row_zero_pinned_after_every_cycle():
    p = build_heat1d(5, 33)
    g0 = p.initial_condition

    def check(k, u):
        np.testing.assert_array_equal(u[0], g0)

    solve(p, m=2, max_iters=5, tol_scale=0.0, callback=check)


def test_max_iters_reached_reports_not_converged():
    rep = solve(build_heat1d(5, 33), m=2, max_iters=2, tol_scale=0.0)
    assert not rep.converged and rep.iterations == 2


def test_solve_rejects_bad_options():
    p = build_heat1d(3, 9)
    with pytest.raises(ValueError):
        solve(p, rate_method="median")
    with pytest.raises(ValueError):
        solve(p, max_iters=-1)


# -- rates --------------------------------------------------------------------------------


def test_rate_methods():
    hist = [1.0, 0.5, 0.2, 0.1, 0.05, 0.01, 0.004]
    ratios = [0.2 / 0.5, 0.1 / 0.2, 0.05 / 0.1, 0.01 / 0.05, 0.004 / 0.01]
    assert convergence_rate(hist, "arithmetic-last-5") == pytest.approx(np.mean(ratios), rel=1e-15)
    assert convergence_rate(hist, "geometric-overall") == pytest.approx(0.004 ** (1 / 6), rel=1e-15)


def test_rate_short_history_uses_available_ratios():
    assert convergence_rate([1.0, 0.1, 0.02], "arithmetic-last-5") == pytest.approx((0.1 + 0.2) / 2)
    assert convergence_rate([1.0], "geometric-overall") == 0.0


def test_rate_unknown_method():
    with pytest.raises(ValueError):
        convergence_rate([1.0, 0.5], "last")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=20))
def test_constant_factor_history_recovers_factor(factors):
    rho = factors[0]
    hist = [rho**k for k in range(len(factors) + 1)]
    for method in ("arithmetic-last-5", "geometric-overall"):
        assert convergence_rate(hist, method) == pytest.approx(rho, rel=1e-9)
