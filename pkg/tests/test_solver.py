import math

import numpy as np
import pytest

from dziobek import solver
from dziobek.ccequations import (
    dziobek_residual,
    family_masses,
    fit_multipliers,
    lambda_from_config,
    position_residual,
)
from dziobek.errors import ConvergenceError, DomainError, OracleError
from dziobek.geometry import (
    PlanarConfiguration,
    SquaredDistanceVector,
    albouy_spread,
    cayley_menger,
    embed,
    oriented_areas_from_positions,
)
from dziobek.solver import (
    SQUARE_SDV,
    SolveOptions,
    TheoremWitnessError,
    _trapezoid_equations,
    constrained_solve,
    continuation_sweep,
    oracle_trapezoid,
    solve_dziobek,
    solve_position,
    square_configuration,
    trapezoid_parameters,
)


def ratios(sol):
    return sol.sdv.normalized().as_array()


# ---------------------------------------------------------------- oracle


def test_oracle_equal_masses():
    res = oracle_trapezoid(1.0)
    assert res.s == pytest.approx(1.0, abs=1e-11)
    assert res.h == pytest.approx(2.0, abs=1e-11)


def test_oracle_half_top_shorter(oracle_half):
    assert 0 < oracle_half.s < 1
    assert 0 < oracle_half.h


def test_oracle_reduced_equations_vanish(oracle_half):
    e1, e2 = _trapezoid_equations(oracle_half.s, oracle_half.h, 0.5)
    assert abs(e1) < 1e-12 and abs(e2) < 1e-12


def test_oracle_is_central_in_position_space(oracle_half):
    cfg = oracle_half.configuration
    assert position_residual(cfg, lambda_from_config(cfg)).norm < 1e-10


def test_oracle_closes_loop_with_dziobek_equations(oracle_half):
    sdv = oracle_half.sdv
    areas = oriented_areas_from_positions(oracle_half.configuration)
    mult, resid = fit_multipliers(sdv, areas, family_masses(0.5))
    assert resid < 1e-10
    assert dziobek_residual(sdv, areas, mult.nu, mult.mu, 0.5).norm < 1e-10


def test_oracle_failure_reported():
    with pytest.raises(OracleError):
        oracle_trapezoid(0.5, upper=0.5)


def test_oracle_rejects_bad_alpha():
    with pytest.raises(DomainError):
        oracle_trapezoid(0.0)


# ---------------------------------------------------------------- position solver


def test_position_square_from_perturbed():
    rng = np.random.default_rng(7)
    sq = square_configuration()
    start = PlanarConfiguration(sq.positions + 0.01 * rng.normal(size=(4, 2)), sq.masses)
    sol = solve_position([1, 1, 1, 1], start)
    assert sol.residual_position < 1e-12
    assert sol.iterations <= 25
    assert abs(math.sqrt(sol.sdv.b / sol.sdv.a) - math.sqrt(2)) < 1e-10
    assert sol.geometry_class == "Square"


def test_position_from_oracle(oracle_half):
    sol = solve_position(family_masses(0.5), oracle_half.configuration)
    scale = sol.sdv.scale
    assert sol.residual_position < 1e-12
    assert abs(sol.sdv.b - sol.sdv.e) < 1e-10 * scale
    assert abs(sol.sdv.c - sol.sdv.d) < 1e-10 * scale
    np.testing.assert_allclose(trapezoid_parameters(sol.sdv, sol.areas), (oracle_half.s, oracle_half.h), rtol=1e-8)


def test_position_basin_experiment(oracle_half):
    rng = np.random.default_rng(42)
    masses = family_masses(0.5)
    target = oracle_half.sdv.normalized().as_array()
    converged = 0
    for _ in range(20):
        pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float) + rng.uniform(-0.35, 0.35, size=(4, 2))
        start = PlanarConfiguration(pts, masses)
        if not np.array_equal(np.sign(oriented_areas_from_positions(start).as_array()), [-1, 1, -1, 1]):
            continue
        try:
            sol = solve_position(masses, start)
        except ConvergenceError:
            continue
        converged += 1
        # never a converged answer that breaks the symmetry conclusion
        np.testing.assert_allclose(ratios(sol), target, rtol=1e-8)
        assert sol.geometry_class == "IsoscelesTrapezoid"
    assert converged > 0


def test_position_gauge_independence():
    start = embed(SQUARE_SDV, family_masses(0.5))
    s1 = solve_position(family_masses(0.5), start, SolveOptions(inertia=1.0))
    s4 = solve_position(family_masses(0.5), start, SolveOptions(inertia=4.0))
    np.testing.assert_allclose(ratios(s1), ratios(s4), rtol=1e-10)
    assert s1.configuration.masses @ (s1.configuration.positions**2).sum(1) == pytest.approx(1.0)


def test_position_finite_difference_jacobian(oracle_half):
    sol = solve_position(family_masses(0.5), embed(SQUARE_SDV, family_masses(0.5)),
                         SolveOptions(jacobian_mode="finite-difference"))
    np.testing.assert_allclose(ratios(sol), oracle_half.sdv.normalized().as_array(), rtol=1e-8)


def test_position_rejects_concave_start():
    cfg = PlanarConfiguration([[0, 0], [3, 0], [1.5, 3], [1.5, 1]], [1, 1, 1, 1])
    with pytest.raises(DomainError):
        solve_position([1, 1, 1, 1], cfg)


# ---------------------------------------------------------------- dziobek solver


def test_dziobek_square_fixed_point():
    sol = solve_dziobek(1.0, SQUARE_SDV)
    assert sol.iterations <= 1
    assert sol.multipliers.nu > 0
    assert sol.geometry_class == "Square"


def test_dziobek_matches_position(dziobek_half):
    pos = solve_position(family_masses(0.5), embed(SQUARE_SDV, family_masses(0.5)))
    np.testing.assert_allclose(ratios(dziobek_half), ratios(pos), rtol=1e-8)


def test_dziobek_analytic_vs_fd_jacobian():
    system = solver._DziobekSystem(0.3, SQUARE_SDV, "analytic")
    fd_system = solver._DziobekSystem(0.3, SQUARE_SDV, "finite-difference")
    planar = PlanarConfiguration([[0, 0], [1, 0], [0.8, 0.9], [0.1, 0.7]], [1, 1, 1, 1])
    from dziobek.geometry import squared_distances

    x = np.concatenate([squared_distances(planar).normalized().as_array()[1:], [0.4, -0.3]])
    np.testing.assert_allclose(system.jacobian(x), fd_system.jacobian(x), rtol=1e-6, atol=1e-8)


def test_dziobek_small_alpha_warm_start():
    warm = solve_dziobek(0.1, solve_dziobek(0.2).sdv)
    sol = solve_dziobek(0.05, warm.sdv)
    assert sol.residual_dziobek < 1e-12 and sol.geometry_class == "IsoscelesTrapezoid"


def test_dziobek_cold_start_failure_is_reported():
    # far from the continuation path the solver must fail loudly, never return garbage
    with pytest.raises(ConvergenceError):
        solve_dziobek(0.01, SQUARE_SDV)


def test_dziobek_rejects_non_convex_initial():
    with pytest.raises(DomainError):
        solve_dziobek(0.5, SquaredDistanceVector(1, 9, 1, 1, 1, 1))


def test_dziobek_rejects_bad_alpha():
    with pytest.raises(DomainError):
        solve_dziobek(1.5)


def test_solution_invariants(acceptance_sweep):
    for rec in acceptance_sweep:
        sol = rec.solution
        d = sol.areas
        assert d.sum_defect() < 1e-12
        np.testing.assert_array_equal(np.sign(d.as_array()), [-1, 1, -1, 1])
        assert abs(cayley_menger(sol.sdv)) / sol.sdv.scale**3 < 1e-10
        assert albouy_spread(sol.sdv, d) < 1e-10
        assert sol.multipliers.nu > 0
        assert sol.multipliers.lambda_cc < 0


def test_determinism():
    a = solve_dziobek(0.37)
    b = solve_dziobek(0.37)
    assert a.iterations == b.iterations
    assert a.sdv == b.sdv
    assert np.array_equal(a.configuration.positions, b.configuration.positions)


# ---------------------------------------------------------------- constrained


@pytest.mark.parametrize("which,other", [("equal_diagonals", ("c", "d")), ("equal_laterals", ("b", "e"))])
def test_constrained_half(which, other, oracle_half):
    sol = constrained_solve(0.5, which)
    scale = sol.sdv.scale
    assert sol.residual_dziobek < 1e-12
    assert abs(getattr(sol.sdv, other[0]) - getattr(sol.sdv, other[1])) < 1e-10 * scale
    np.testing.assert_allclose(ratios(sol), oracle_half.sdv.normalized().as_array(), rtol=1e-8)


@pytest.mark.parametrize("which", solver.CONSTRAINTS)
def test_constrained_square(which):
    assert constrained_solve(1.0, which).geometry_class == "Square"


def test_constrained_inconsistent_is_loud(monkeypatch):
    # break the b/e symmetry of the equations: e := b can then no longer solve the full system
    orig = solver.dziobek_entries

    def skewed(sdv, areas, nu, mu, masses):
        out = orig(sdv, areas, nu, mu, masses)
        out[1] -= 0.5 * nu * areas.d1 * areas.d3 / (masses[0] * masses[2])
        return out

    monkeypatch.setattr(solver, "dziobek_entries", skewed)
    opts = SolveOptions(jacobian_mode="finite-difference")
    with pytest.raises(TheoremWitnessError) as info:
        constrained_solve(0.5, "equal_diagonals", opts=opts)
    assert info.value.residual > 1e-6


def test_constrained_unknown():
    with pytest.raises(ValueError):
        constrained_solve(0.5, "kite")


# ---------------------------------------------------------------- sweep


def test_sweep_ten_steps():
    recs = continuation_sweep(1.0, 0.1, 10)
    assert len(recs) == 10
    assert [r.alpha for r in recs] == sorted((r.alpha for r in recs), reverse=True)
    assert all(r.ok for r in recs)
    assert recs[0].solution.geometry_class == "Square"
    assert all(r.solution.geometry_class == "IsoscelesTrapezoid" for r in recs[1:])


def test_sweep_single_step():
    recs = continuation_sweep(0.6, 0.1, 1)
    assert len(recs) == 1 and recs[0].alpha == 0.6 and recs[0].ok


def test_sweep_bad_bounds():
    with pytest.raises(DomainError):
        continuation_sweep(0.1, 0.5, 3)


def test_sweep_warm_starts_from_last_success(monkeypatch):
    seen = []
    real = solver.solve_dziobek

    def flaky(alpha, guess, opts):
        seen.append((alpha, guess))
        if abs(alpha - 0.8) < 1e-9:
            raise ConvergenceError("injected", reason="injected")
        return real(alpha, guess, opts)

    monkeypatch.setattr(solver, "solve_dziobek", flaky)
    recs = continuation_sweep(1.0, 0.7, 4)
    assert [r.status for r in recs] == ["ok", "ok", "failed:injected", "ok"]
    assert recs[2].solution is None
    # alpha = 0.7 started from the alpha = 0.9 solution
    assert seen[3][1] == recs[1].solution.sdv


def test_sweep_tiny_iteration_budget_fails_gracefully():
    recs = continuation_sweep(1.0, 0.1, 3, SolveOptions(max_iterations=1))
    assert recs[0].ok
    assert any(r.status.startswith("failed") for r in recs[1:])
