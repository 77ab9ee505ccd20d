"""Solvers for convex central configurations with masses (1, 1, alpha, alpha).

Three independent routes are provided:

* ``solve_position``: damped Gauss-Newton on the position-space equations,
  gauge fixed by centering, a moment-of-inertia normalization and a
  horizontal q1q2 base.
* ``solve_dziobek``: damped Newton on the 7x7 Dziobek system in
  (b, c, d, e, f, nu, mu) with a = 1 and the Cayley-Menger constraint.
* ``oracle_trapezoid``: grid scan plus bisection on the two scalar
  equations left after imposing the isosceles-trapezoid symmetry.

``constrained_solve`` imposes one of the two side-pair equalities and
checks that the full system is still satisfied, and
``continuation_sweep`` walks alpha downwards with warm starts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import bisect

from .ccequations import (
    Multipliers,
    acceleration_jacobian,
    accelerations,
    dziobek_entries,
    family_masses,
    fit_multipliers,
    lambda_from_config,
    pair_mass_products,
    phi_prime,
    position_residual,
)
from .classify import classify, convexity
from .classify import diagnostics as run_diagnostics
from .errors import (
    ConvergenceError,
    DomainError,
    DziobekError,
    InconsistentConvexityError,
    NotRealizableError,
    OracleError,
)
from .geometry import (
    AREA_SIGNS,
    PAIRS,
    OrientedAreaVector,
    PlanarConfiguration,
    SquaredDistanceVector,
    area_jacobian,
    cayley_menger,
    cayley_menger_gradient,
    embed,
    oriented_areas_from_distances,
    oriented_areas_from_positions,
    squared_distances,
)

log = logging.getLogger(__name__)

SQUARE_SDV = SquaredDistanceVector(1.0, 2.0, 1.0, 1.0, 2.0, 1.0)
COLLISION_FLOOR = 1e-8
CONSTRAINTS = ("equal_diagonals", "equal_laterals")
# Iterates sit off the planar manifold (S = 0 is one of the equations), so the
# area-sum identity only holds approximately until convergence.  A wrong sign
# pattern has an order-one defect, so this band still rejects it.
ITERATE_AREA_SUM_TOL = 0.05


class TheoremWitnessError(DziobekError, RuntimeError):
    """A constrained least-squares solve converged to a point that is not a
    central configuration.  This would contradict the symmetry theorems."""

    def __init__(self, message, *, residual, point):
        super().__init__(message)
        self.residual = residual
        self.point = point


class NonPositiveNuError(ConvergenceError):
    """Converged Dziobek solution with nu <= 0."""


@dataclass(frozen=True)
class SolveOptions:
    max_iterations: int = 60
    residual_tolerance: float = 1e-12
    step_tolerance: float = 1e-12
    damping: int = 40
    jacobian_mode: str = "analytic"
    seed: int = 42
    inertia: Optional[float] = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.residual_tolerance > 0:
            raise ValueError("residual_tolerance must be positive")
        if self.damping < 0:
            raise ValueError("damping must be >= 0")
        if self.jacobian_mode not in ("analytic", "finite-difference"):
            raise ValueError(f"unknown jacobian_mode {self.jacobian_mode!r}")


@dataclass(frozen=True)
class CCSolution:
    configuration: PlanarConfiguration
    sdv: SquaredDistanceVector
    areas: OrientedAreaVector
    multipliers: Multipliers
    residual_position: float
    residual_dziobek: float
    iterations: int
    geometry_class: str
    alpha: Optional[float] = None
    method: str = ""
    converged: bool = True
    flags: tuple = ()

    @property
    def masses(self) -> np.ndarray:
        return self.configuration.masses


@dataclass
class SweepRecord:
    alpha: float
    solution: Optional[CCSolution]
    diagnostics: dict = field(default_factory=dict)
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class OracleResult:
    alpha: float
    s: float
    h: float
    sdv: SquaredDistanceVector
    configuration: PlanarConfiguration


class _Inadmissible(Exception):
    pass


def _fd_jacobian(fun, x, rel_step=1e-7):
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        h = rel_step * max(abs(x[k]), 1.0)
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        cols.append((fun(xp) - fun(xm)) / (2 * h))
    return np.column_stack(cols)


def _damped_gauss_newton(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    opts: SolveOptions,
    label: str,
):
    """Newton (square) / Gauss-Newton (overdetermined) iteration with step halving.

    ``residual`` raises ``_Inadmissible`` for points outside the admissible
    region; such trial steps are halved like residual increases.  Returns
    (x, residual_vector, iterations).
    """
    x = np.array(x0, dtype=float)
    try:
        r = residual(x)
    except _Inadmissible as exc:
        raise ConvergenceError(f"{label}: initial guess inadmissible ({exc})", reason="bad_initial") from exc
    small_steps = 0
    for it in range(opts.max_iterations + 1):
        norm = np.max(np.abs(r))
        jac = jacobian(x)
        if not np.all(np.isfinite(jac)):
            raise ConvergenceError(f"{label}: non-finite Jacobian", iterations=it, residual=norm, reason="singular")
        step, _, rank, sv = np.linalg.lstsq(jac, -r, rcond=None)
        if rank < jac.shape[1]:
            cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
            raise ConvergenceError(
                f"{label}: singular Jacobian (condition estimate {cond:.3e})",
                iterations=it, residual=norm, reason="singular",
            )
        small_step = np.max(np.abs(step)) <= opts.step_tolerance * max(np.max(np.abs(x)), 1.0)
        if norm < opts.residual_tolerance and small_step:
            return x, r, it
        small_steps = small_steps + 1 if small_step else 0
        if small_steps >= 3:
            return x, r, -it - 1  # stagnated above tolerance; caller decides
        if it == opts.max_iterations:
            break
        sq = r @ r
        t = 1.0
        for _ in range(opts.damping + 1):
            trial = x + t * step
            try:
                r_trial = residual(trial)
            except _Inadmissible:
                t *= 0.5
                continue
            if r_trial @ r_trial < sq:
                x, r = trial, r_trial
                break
            t *= 0.5
        else:
            if norm < opts.residual_tolerance:
                return x, r, it
            if small_step:
                return x, r, -it - 1
            raise ConvergenceError(
                f"{label}: step halving exhausted at residual {norm:.3e}",
                iterations=it, residual=norm, reason="damping_exhausted",
            )
    raise ConvergenceError(
        f"{label}: no convergence in {opts.max_iterations} iterations (residual {np.max(np.abs(r)):.3e})",
        iterations=opts.max_iterations, residual=float(np.max(np.abs(r))), reason="max_iterations",
    )


def _is_convex_in_order(areas: OrientedAreaVector) -> bool:
    return bool(np.array_equal(np.sign(areas.as_array()), AREA_SIGNS))


def _finish(config, sdv, areas, masses, iterations, method, alpha, opts) -> CCSolution:
    mult, res_dz = fit_multipliers(sdv, areas, masses, config)
    lam = mult.lambda_cc
    res_pos = position_residual(config, lam).norm
    flags = []
    if not lam < 0:
        log.warning("%s: lambda_cc = %r is not negative", method, lam)
        flags.append("lambda_cc_nonnegative")
    if not mult.nu > 0:
        raise NonPositiveNuError(
            f"{method}: converged solution has nu = {mult.nu:.6e} <= 0", iterations=iterations,
            residual=res_dz, reason="nu_nonpositive",
        )
    try:
        label = classify(sdv).label
    except DziobekError:
        label = convexity(config)
    return CCSolution(
        configuration=config, sdv=sdv, areas=areas, multipliers=mult,
        residual_position=res_pos, residual_dziobek=res_dz, iterations=iterations,
        geometry_class=label, alpha=alpha, method=method, flags=tuple(flags),
    )


def _alpha_of(masses) -> Optional[float]:
    m = np.asarray(masses, dtype=float)
    if m[0] == m[1] and m[2] == m[3]:
        return float(m[2] / m[0])
    return None


# --------------------------------------------------------------------- position


def solve_position(masses, initial: PlanarConfiguration, opts: SolveOptions = SolveOptions()) -> CCSolution:
    masses = np.asarray(masses, dtype=float)
    if masses.shape != (4,) or np.any(masses <= 0):
        raise DomainError("masses must be four positive reals")
    start = initial.with_masses(masses).centered()
    if not _is_convex_in_order(oriented_areas_from_positions(start)):
        raise DomainError("initial configuration is not convex in order 1-2-3-4")
    total = masses.sum()
    inertia0 = opts.inertia if opts.inertia is not None else float(masses @ (start.positions**2).sum(1))
    start = start.scaled(np.sqrt(inertia0 / float(masses @ (start.positions**2).sum(1))))
    length = np.sqrt(inertia0 / total)
    acc_ref = float(np.max(np.abs(accelerations(start))))

    def config_of(x):
        return PlanarConfiguration(x[:8].reshape(4, 2), masses)

    def residual(x):
        q = x[:8].reshape(4, 2)
        r2 = np.array([((q[i] - q[j]) ** 2).sum() for i, j in PAIRS])
        if r2.min() < COLLISION_FLOOR * r2.max():
            raise _Inadmissible("near collision")
        cfg = config_of(x)
        if not _is_convex_in_order(oriented_areas_from_positions(cfg)):
            raise _Inadmissible("convexity lost")
        acc = accelerations(cfg)
        return np.concatenate([
            ((acc - x[8] * q) / acc_ref).ravel(),
            masses @ q / (total * length),
            [(masses @ (q**2).sum(1) - inertia0) / inertia0],
            [(q[0, 1] - q[1, 1]) / length],
        ])

    def analytic_jacobian(x):
        q = x[:8].reshape(4, 2)
        jac = np.zeros((12, 9))
        jac[:8, :8] = (acceleration_jacobian(config_of(x)) - x[8] * np.eye(8)) / acc_ref
        jac[:8, 8] = -x[:8] / acc_ref
        for i in range(4):
            jac[8, 2 * i] = masses[i] / (total * length)
            jac[9, 2 * i + 1] = masses[i] / (total * length)
            jac[10, 2 * i : 2 * i + 2] = 2 * masses[i] * q[i] / inertia0
        jac[11, 1] = 1.0 / length
        jac[11, 3] = -1.0 / length
        return jac

    def fd_jacobian(x):
        return _fd_jacobian(residual, x)

    jacobian = analytic_jacobian if opts.jacobian_mode == "analytic" else fd_jacobian
    x0 = np.concatenate([start.positions.ravel(), [lambda_from_config(start)]])
    x, r, its = _damped_gauss_newton(residual, jacobian, x0, opts, "solve_position")
    if its < 0:
        raise ConvergenceError(
            f"solve_position: stagnated at residual {np.max(np.abs(r)):.3e}",
            iterations=-its - 1, residual=float(np.max(np.abs(r))), reason="stagnated",
        )
    config = config_of(x).centered()
    sdv = squared_distances(config)
    areas = oriented_areas_from_positions(config)
    return _finish(config, sdv, areas, masses, its, "position", _alpha_of(masses), opts)


# --------------------------------------------------------------------- dziobek


def _full_sdv(x) -> SquaredDistanceVector:
    return SquaredDistanceVector(1.0, *(float(v) for v in x[:5]))


class _DziobekSystem:
    """The seven scaled equations in unknowns (b, c, d, e, f, nu, mu), a = 1."""

    def __init__(self, alpha: float, reference: SquaredDistanceVector, jacobian_mode: str):
        self.alpha = alpha
        self.masses = family_masses(alpha)
        self.weight = 1.0 / abs(phi_prime(reference.scale))
        self.cm_scale = reference.scale**3
        self.coef = 1.0 / pair_mass_products(self.masses)
        self.jacobian_mode = jacobian_mode

    def areas(self, sdv):
        if np.any(sdv.as_array() <= 0):
            raise _Inadmissible("nonpositive squared distance")
        try:
            return oriented_areas_from_distances(sdv, tol=ITERATE_AREA_SUM_TOL)
        except (NotRealizableError, InconsistentConvexityError) as exc:
            raise _Inadmissible(str(exc)) from exc

    def residual(self, x):
        sdv = _full_sdv(x)
        areas = self.areas(sdv)
        if np.any(areas.as_array() == 0):
            raise _Inadmissible("degenerate sub-triangle")
        nu, mu = x[5], x[6]
        eqs = dziobek_entries(sdv, areas, nu, mu, self.masses) * self.weight
        return np.append(eqs, cayley_menger(sdv) / self.cm_scale)

    def jacobian(self, x):
        if self.jacobian_mode != "analytic":
            return _fd_jacobian(self.residual, x)
        sdv = _full_sdv(x)
        areas = self.areas(sdv)
        s = sdv.as_array()
        d = areas.as_array()
        dA = area_jacobian(sdv)  # (4, 6)
        nu = x[5]
        jac = np.zeros((7, 7))
        for k, (i, j) in enumerate(PAIRS):
            dprod = d[j] * dA[i] + d[i] * dA[j]  # d(Delta_i Delta_j)/d(a..f)
            row = -nu * self.coef[k] * dprod
            row[k] += 1.5 * 0.5 * s[k] ** -2.5  # phi''(s)
            jac[k, :5] = row[1:] * self.weight
            jac[k, 5] = -self.coef[k] * d[i] * d[j] * self.weight
            jac[k, 6] = -self.weight
        jac[6, :5] = cayley_menger_gradient(sdv)[1:] / self.cm_scale
        return jac


def _dziobek_start(alpha, sdv, nu_mu=None):
    masses = family_masses(alpha)
    sdv = sdv.normalized()
    try:
        areas = oriented_areas_from_distances(sdv, tol=ITERATE_AREA_SUM_TOL)
    except (NotRealizableError, InconsistentConvexityError) as exc:
        raise DomainError(f"initial sdv is not a convex quadrilateral in order 1-2-3-4: {exc}") from exc
    if nu_mu is None:
        mult, _ = fit_multipliers(sdv, areas, masses)
        nu_mu = (mult.nu, mult.mu)
    return sdv, np.concatenate([sdv.as_array()[1:], nu_mu])


def _finish_dziobek(alpha, x, its, method, opts):
    sdv = _full_sdv(x)
    try:
        areas = oriented_areas_from_distances(sdv)
    except (NotRealizableError, InconsistentConvexityError) as exc:
        raise ConvergenceError(f"{method}: end point is not a convex configuration ({exc})",
                               iterations=its, reason="not_convex") from exc
    masses = family_masses(alpha)
    config = embed(sdv, masses)
    if not _is_convex_in_order(areas):
        raise ConvergenceError(f"{method}: converged to a non-convex point", iterations=its, reason="not_convex")
    sol = _finish(config, sdv, areas, masses, its, method, alpha, opts)
    mult = replace(sol.multipliers, nu=float(x[5]), mu=float(x[6]))
    return replace(sol, multipliers=mult)


def _check_alpha(alpha):
    if not (0 < alpha <= 1):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")


def solve_dziobek(alpha: float, initial_sdv: SquaredDistanceVector = SQUARE_SDV,
                  opts: SolveOptions = SolveOptions()) -> CCSolution:
    _check_alpha(alpha)
    ref, x0 = _dziobek_start(alpha, initial_sdv)
    system = _DziobekSystem(alpha, ref, opts.jacobian_mode)
    x, r, its = _damped_gauss_newton(system.residual, system.jacobian, x0, opts, "solve_dziobek")
    if its < 0:
        raise ConvergenceError(
            f"solve_dziobek: stagnated at residual {np.max(np.abs(r)):.3e}",
            iterations=-its - 1, residual=float(np.max(np.abs(r))), reason="stagnated",
        )
    return _finish_dziobek(alpha, x, its, "dziobek", opts)


def constrained_solve(alpha: float, constraint: str, initial_sdv: SquaredDistanceVector = SQUARE_SDV,
                      opts: SolveOptions = SolveOptions()) -> CCSolution:
    """Solve with e := b (equal_diagonals) or d := c (equal_laterals) imposed.

    Six unknowns against all seven equations, by damped Gauss-Newton.  A
    least-squares point whose full residual stays above tolerance raises
    ``TheoremWitnessError``.
    """
    _check_alpha(alpha)
    if constraint not in CONSTRAINTS:
        raise ValueError(f"constraint must be one of {CONSTRAINTS}")
    # positions in the 7-vector (b, c, d, e, f, nu, mu): e is 3, b is 0, d is 2, c is 1
    dropped, kept_twin = (3, 0) if constraint == "equal_diagonals" else (2, 1)
    keep = [k for k in range(7) if k != dropped]

    ref, x0_full = _dziobek_start(alpha, initial_sdv)
    x0_full[dropped] = x0_full[kept_twin] = 0.5 * (x0_full[dropped] + x0_full[kept_twin])
    system = _DziobekSystem(alpha, ref, opts.jacobian_mode)

    def expand(y):
        full = np.empty(7)
        full[keep] = y
        full[dropped] = full[kept_twin]
        return full

    def residual(y):
        return system.residual(expand(y))

    def jacobian(y):
        jac = system.jacobian(expand(y))
        jac[:, kept_twin] += jac[:, dropped]
        return jac[:, keep]

    try:
        y, r, its = _damped_gauss_newton(residual, jacobian, x0_full[keep], opts, f"constrained_solve[{constraint}]")
    except ConvergenceError as exc:
        if exc.reason == "damping_exhausted":
            raise TheoremWitnessError(
                f"constrained_solve[{constraint}] at alpha={alpha}: least-squares minimum with "
                f"residual {exc.residual:.3e}", residual=exc.residual, point=None,
            ) from exc
        raise
    norm = float(np.max(np.abs(r)))
    if its < 0 or norm >= opts.residual_tolerance:
        raise TheoremWitnessError(
            f"constrained_solve[{constraint}] at alpha={alpha}: least-squares point has full "
            f"residual {norm:.3e} >= {opts.residual_tolerance:.1e}",
            residual=norm, point=expand(y),
        )
    return _finish_dziobek(alpha, expand(y), its, f"constrained:{constraint}", opts)


# --------------------------------------------------------------------- oracle


def _trapezoid_equations(s, h, alpha):
    """The two independent equations for q1=(-1,0), q2=(1,0), q3=(s,h), q4=(-s,h).

    With the center of mass at height yc = alpha h / (1 + alpha), the body-1
    x equation fixes lambda_cc = -a1x.  The remaining independent conditions
    are the body-4 x equation and the body-1 y equation.
    """
    r13 = ((s + 1.0) ** 2 + h * h) ** -1.5  # also r24
    r14 = ((1.0 - s) ** 2 + h * h) ** -1.5  # also r23
    yc = alpha * h / (1.0 + alpha)
    a1x = 0.25 + alpha * (s + 1.0) * r13 + alpha * (1.0 - s) * r14
    a1y = alpha * h * (r13 + r14)
    a4x = (s - 1.0) * r14 + (s + 1.0) * r13 + alpha / (4.0 * s * s)
    return a4x - s * a1x, a1y - a1x * yc


def _first_bracket(values, grid):
    sgn = np.sign(values)
    idx = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    if idx.size == 0:
        return None
    k = int(idx[0])
    return grid[k], grid[k + 1]


def oracle_trapezoid(alpha: float, grid: int = 400, upper: float = 3.0, xtol: float = 1e-13) -> OracleResult:
    """Brute-force isosceles-trapezoid central configuration.

    For every s on a grid the height h*(s) solving the body-1 y equation is
    located by scanning h over (0, upper] and bisecting; the body-4 x
    equation along that curve is then scanned in s and bisected, each
    evaluation re-solving h*(s).
    """
    _check_alpha(alpha)
    if grid < 4:
        raise ValueError("grid must be at least 4")
    hs = np.linspace(upper / grid, upper, grid)
    ss = np.linspace(upper / grid, upper, grid)

    def height(s):
        vals = _trapezoid_equations(s, hs, alpha)[1]
        br = _first_bracket(vals, hs)
        if br is None:
            return None
        return bisect(lambda h: _trapezoid_equations(s, h, alpha)[1], *br, xtol=xtol, maxiter=200)

    g_vals, g_grid = [], []
    for s in ss:
        h = height(s)
        if h is not None:
            g_vals.append(_trapezoid_equations(s, h, alpha)[0])
            g_grid.append(s)
    br = _first_bracket(np.array(g_vals), np.array(g_grid)) if len(g_vals) > 1 else None
    if br is None:
        raise OracleError(f"oracle_trapezoid: no sign change on the grid for alpha={alpha}")

    def g(s):
        h = height(s)
        if h is None:
            raise OracleError(f"oracle_trapezoid: height curve lost at s={s}")
        return _trapezoid_equations(s, h, alpha)[0]

    s = bisect(g, *br, xtol=xtol, maxiter=200)
    h = height(s)
    config = PlanarConfiguration([[-1.0, 0.0], [1.0, 0.0], [s, h], [-s, h]], family_masses(alpha))
    return OracleResult(alpha, float(s), float(h), squared_distances(config), config.centered())


def trapezoid_parameters(sdv: SquaredDistanceVector, areas: OrientedAreaVector) -> tuple[float, float]:
    """(s, h) of a trapezoid solution after rescaling its base q1q2 to length 2."""
    return float(np.sqrt(sdv.f / sdv.a)), float(4.0 * abs(areas.d3) / sdv.a)


def default_initial_sdv(alpha: float) -> SquaredDistanceVector:
    """Oracle output where it exists, the square otherwise."""
    if alpha == 1.0:
        return SQUARE_SDV
    try:
        return oracle_trapezoid(alpha).sdv
    except OracleError:
        return SQUARE_SDV


def square_configuration(masses=(1.0, 1.0, 1.0, 1.0)) -> PlanarConfiguration:
    return PlanarConfiguration([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], masses).centered()


# --------------------------------------------------------------------- sweep


def continuation_sweep(alpha_start: float, alpha_end: float, steps: int,
                       opts: SolveOptions = SolveOptions(), initial_sdv: Optional[SquaredDistanceVector] = None,
                       diagnostics: bool = True) -> list[SweepRecord]:
    """Solve along alpha_start -> alpha_end, warm-starting from the last success."""
    if not (0 < alpha_end <= alpha_start <= 1):
        raise DomainError("need 0 < alpha_end <= alpha_start <= 1")
    if steps < 1:
        raise DomainError("steps must be >= 1")
    alphas = [alpha_start] if steps == 1 else np.round(np.linspace(alpha_start, alpha_end, steps), 12)
    guess = initial_sdv if initial_sdv is not None else default_initial_sdv(alpha_start)
    records = []
    for alpha in alphas:
        alpha = float(alpha)
        try:
            sol = solve_dziobek(alpha, guess, opts)
        except DziobekError as exc:
            log.info("sweep: alpha=%s failed: %s", alpha, exc)
            records.append(SweepRecord(alpha, None, {}, f"failed:{getattr(exc, 'reason', type(exc).__name__)}"))
            continue
        guess = sol.sdv
        diag = run_diagnostics(sol) if diagnostics else {}
        status = "ok" if all(rep.passed for rep in diag.values()) else "check_failed"
        records.append(SweepRecord(alpha, sol, diag, status))
    return records
