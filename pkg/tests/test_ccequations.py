import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dziobek.ccequations import (
    acceleration_jacobian,
    accelerations,
    dziobek_residual,
    fit_multipliers,
    general_dziobek_residual,
    lambda_from_config,
    mass_scaling_check,
    pair_mass_products,
    phi_prime,
    position_residual,
)
from dziobek.errors import DegenerateFitError, DomainError, NotCenteredError
from dziobek.geometry import (
    OrientedAreaVector,
    PlanarConfiguration,
    SquaredDistanceVector,
    oriented_areas_from_positions,
    potential,
    random_convex_configuration,
    squared_distances,
)


def test_phi_prime_values():
    assert phi_prime(1.0) == -0.5
    assert phi_prime(4.0) == -1 / 16


def test_phi_prime_domain():
    with pytest.raises(DomainError):
        phi_prime(0.0)
    with pytest.raises(DomainError):
        phi_prime(-1.0)


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_phi_prime_monotone(s1, s2):
    if s1 < s2:
        assert phi_prime(s1) < phi_prime(s2) or math.isclose(s1, s2, rel_tol=1e-15)


def test_homogeneity_identity(rng):
    # sum_i q_i . dU/dq_i = -U  (degree -1)
    for _ in range(50):
        cfg = random_convex_configuration(rng, masses=rng.uniform(0.2, 2, 4))
        grad = cfg.masses[:, None] * accelerations(cfg)
        assert np.sum(cfg.positions * grad) == pytest.approx(-potential(cfg), rel=1e-12)


def test_acceleration_jacobian_fd(rng):
    cfg = random_convex_configuration(rng, masses=[1, 2, 3, 4])
    x = cfg.positions.ravel()
    h = 1e-6
    fd = np.empty((8, 8))
    for k in range(8):
        e = np.zeros(8)
        e[k] = h
        plus = accelerations(PlanarConfiguration((x + e).reshape(4, 2), cfg.masses)).ravel()
        minus = accelerations(PlanarConfiguration((x - e).reshape(4, 2), cfg.masses)).ravel()
        fd[:, k] = (plus - minus) / (2 * h)
    np.testing.assert_allclose(acceleration_jacobian(cfg), fd, rtol=1e-6, atol=1e-6)


def test_square_is_central(centered_square):
    lam = lambda_from_config(centered_square)
    assert lam == pytest.approx(-(4 + math.sqrt(2)) / 2, rel=1e-15)
    assert position_residual(centered_square, lam).norm < 1e-12


def test_square_zero_lambda_residual(centered_square):
    res = position_residual(centered_square, 0.0)
    assert res.norm > 0
    assert res.entries.shape == (8,)


def test_position_residual_requires_centering(unit_square):
    with pytest.raises(NotCenteredError):
        position_residual(unit_square, -1.0)


def test_random_configuration_not_central(rng):
    for _ in range(100):
        cfg = random_convex_configuration(rng).centered()
        acc = accelerations(cfg).ravel()
        q = cfg.positions.ravel()
        best = acc @ q / (q @ q)  # least-squares lambda
        assert position_residual(cfg, best).norm > 1e-3


def test_lambda_scaling(centered_square):
    lam = lambda_from_config(centered_square)
    for k in (0.5, 2.0, 7.0):
        assert lambda_from_config(centered_square.scaled(k)) == pytest.approx(lam * k**-3, rel=1e-13)
    assert lambda_from_config(centered_square.scaled(mass=2.0)) == pytest.approx(2 * lam, rel=1e-14)


def test_lambda_negative(rng):
    for _ in range(20):
        assert lambda_from_config(random_convex_configuration(rng).centered()) < 0


def _square_data(cfg):
    return squared_distances(cfg), oriented_areas_from_positions(cfg)


def test_dziobek_residual_square(centered_square):
    sdv, areas = _square_data(centered_square)
    mult, resid = fit_multipliers(sdv, areas, [1, 1, 1, 1], centered_square)
    assert mult.nu > 0
    assert resid < 1e-12
    assert dziobek_residual(sdv, areas, mult.nu, mult.mu, 1.0).norm < 1e-12
    assert mult.lambda_cc == pytest.approx(lambda_from_config(centered_square))


def test_dziobek_residual_equal_distances_structure():
    sdv = SquaredDistanceVector(1, 1, 1, 1, 1, 1)
    areas = OrientedAreaVector(-0.1, 0.2, -0.3, 0.2)
    assert dziobek_residual(sdv, areas, 0.0, phi_prime(1.0), 0.5).norm == 0
    other = SquaredDistanceVector(1, 2, 1, 1, 1, 1)
    assert dziobek_residual(other, areas, 0.0, phi_prime(1.0), 0.5).norm > 0


def test_dziobek_residual_domain():
    with pytest.raises(DomainError):
        dziobek_residual(SquaredDistanceVector(0, 1, 1, 1, 1, 1), OrientedAreaVector(-1, 1, -1, 1), 1, 1, 0.5)


def test_dziobek_residual_solution(dziobek_half):
    sol = dziobek_half
    res = dziobek_residual(sol.sdv, sol.areas, sol.multipliers.nu, sol.multipliers.mu, 0.5)
    assert res.norm < 1e-12


def test_general_matches_specialized(rng):
    for alpha in (0.1, 0.5, 0.9):
        cfg = random_convex_configuration(rng)
        sdv, areas = _square_data(cfg)
        masses = np.array([1, 1, alpha, alpha])
        nu, mu = rng.normal(size=2)
        general = general_dziobek_residual(sdv, areas, nu, mu, masses).entries / pair_mass_products(masses)
        special = dziobek_residual(sdv, areas, nu, mu, alpha).entries
        np.testing.assert_allclose(general, special, rtol=1e-15, atol=1e-15)


def test_general_residual_square(centered_square):
    sdv, areas = _square_data(centered_square)
    mult, _ = fit_multipliers(sdv, areas, [1, 1, 1, 1])
    assert general_dziobek_residual(sdv, areas, mult.nu, mult.mu, [1, 1, 1, 1]).norm < 1e-12


def test_general_residual_non_cc_bounded_away(rng):
    masses = [1, 2, 3, 4]
    for _ in range(50):
        cfg = random_convex_configuration(rng)
        sdv, areas = _square_data(cfg)
        mult, resid = fit_multipliers(sdv, areas, masses)
        assert resid > 1e-4
        # the least-squares fit minimizes the 2-norm, so nearby multipliers do no better
        base = np.linalg.norm(general_dziobek_residual(sdv, areas, mult.nu, mult.mu, masses).entries
                              / pair_mass_products(masses))
        for dnu, dmu in rng.normal(scale=1e-3, size=(5, 2)):
            trial = general_dziobek_residual(sdv, areas, mult.nu + dnu, mult.mu + dmu, masses)
            assert np.linalg.norm(trial.entries / pair_mass_products(masses)) >= base * (1 - 1e-12)


def test_fit_multipliers_concave_bounded_away():
    cfg = PlanarConfiguration([[0, 0], [3, 0], [1.5, 3], [1.5, 1]], [1, 1, 1, 1])
    _, resid = fit_multipliers(squared_distances(cfg), oriented_areas_from_positions(cfg), [1, 1, 1, 1])
    assert resid > 1e-2


def test_fit_multipliers_degenerate():
    sdv = SquaredDistanceVector(1, 1, 1, 1, 1, 1)
    with pytest.raises(DegenerateFitError):
        fit_multipliers(sdv, OrientedAreaVector(1, 1, 1, 1), [1, 1, 1, 1])


def test_fit_multipliers_solution_nu_positive(dziobek_half):
    mult, resid = fit_multipliers(dziobek_half.sdv, dziobek_half.areas, dziobek_half.masses)
    assert mult.nu > 0
    assert resid < 1e-12


def test_dziobek_residual_affine_in_multipliers(rng):
    cfg = random_convex_configuration(rng)
    sdv, areas = _square_data(cfg)
    p0, p1 = rng.normal(size=2), rng.normal(size=2)
    r0 = dziobek_residual(sdv, areas, *p0, 0.3).entries
    r1 = dziobek_residual(sdv, areas, *p1, 0.3).entries
    for t in (0.25, 2.0, -1.5):
        rt = dziobek_residual(sdv, areas, *(p0 + t * (p1 - p0)), 0.3).entries
        np.testing.assert_allclose(rt, r0 + t * (r1 - r0), atol=1e-12 * np.abs(r0).max())


def test_mass_scaling_square(centered_square):
    assert mass_scaling_check(centered_square, 8.0) < 1e-10


def test_mass_scaling_trapezoid(dziobek_half):
    assert mass_scaling_check(dziobek_half.configuration, 2.0) < 1e-10


def test_mass_scaling_non_cc(rng):
    for _ in range(20):
        cfg = random_convex_configuration(rng).centered()
        base = position_residual(cfg, lambda_from_config(cfg)).norm
        for zeta in (0.5, 2.0, 8.0):
            assert mass_scaling_check(cfg, zeta) == pytest.approx(base, rel=1e-9)


def test_formulations_co_vanish(dziobek_half, rng):
    sol = dziobek_half
    assert sol.residual_position < 1e-12 and sol.residual_dziobek < 1e-12
    cfg = random_convex_configuration(rng, masses=[1, 1, 0.5, 0.5]).centered()
    _, resid = fit_multipliers(squared_distances(cfg), oriented_areas_from_positions(cfg), cfg.masses)
    assert position_residual(cfg, lambda_from_config(cfg)).norm > 1e-6 and resid > 1e-6


def test_phi_monotonicity_orders_distances(acceptance_sweep):
    # equal area products force equal distances; with nu > 0 ordering is inherited
    for rec in acceptance_sweep:
        sol = rec.solution
        d = sol.areas.as_array()
        p13_24 = (d[0] * d[2] - d[1] * d[3]) / sol.areas.magnitude**2
        p23_14 = (d[1] * d[2] - d[0] * d[3]) / sol.areas.magnitude**2
        assert abs(p13_24) < 1e-10 and abs(sol.sdv.b - sol.sdv.e) < 1e-10
        assert abs(p23_14) < 1e-10 and abs(sol.sdv.c - sol.sdv.d) < 1e-10
