"""Shape classification and the symmetry predicates, with margins.

Every predicate returns a ``CheckReport`` whose ``margin`` is a signed
distance to the decision boundary in scaled units: ``margin >= 0`` exactly
when ``passed`` is true.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ccequations import fit_multipliers, mass_scaling_check
from .errors import DomainError, DziobekError, NotApplicableError, PreconditionError
from .geometry import (
    AREA_SIGNS,
    OrientedAreaVector,
    PlanarConfiguration,
    SquaredDistanceVector,
    albouy_spread,
    cayley_menger,
    oriented_areas_from_distances,
    oriented_areas_from_positions,
)

CONVEX = "ConvexInOrder"
CONCAVE = "Concave"
COLLINEAR = "Collinear"

SQUARE = "Square"
RHOMBUS = "Rhombus"
ISOSCELES_TRAPEZOID = "IsoscelesTrapezoid"
KITE = "Kite"
GENERIC = "GenericConvex"

EQUALITY_TOL = 1e-9
COLLINEAR_TOL = 1e-12
SOLUTION_GATE = 1e-9
WEAK_ORDERING_ALPHA = 0.95


@dataclass(frozen=True)
class GeometryClass:
    label: str
    margins: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    margin: float
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "margin": self.margin, **self.detail}


def _report(name, margin, **detail) -> CheckReport:
    margin = float(margin)
    return CheckReport(name, bool(margin >= 0), margin, detail)


def convexity(config: PlanarConfiguration, tol: float = COLLINEAR_TOL) -> str:
    """ConvexInOrder when the areas alternate in sign around 1-2-3-4.

    The mirror pattern (+, -, +, -) of a clockwise labelling is also
    accepted: reflection maps central configurations to central
    configurations and leaves every squared distance unchanged.
    """
    d = oriented_areas_from_positions(config).as_array()
    if np.all(np.abs(d) <= tol * config.diameter**2):
        return COLLINEAR
    signs = np.sign(d)
    if np.array_equal(signs, AREA_SIGNS) or np.array_equal(signs, -AREA_SIGNS):
        return CONVEX
    return CONCAVE


def _shape_margins(sdv: SquaredDistanceVector) -> dict:
    a, b, c, d, e, f = sdv.as_array() / sdv.a
    return {
        "b=e": b - e,
        "c=d": c - d,
        "a=c": a - c,
        "d=f": d - f,
        "a=d": a - d,
        "c=f": c - f,
        "a=f": a - f,
        "b=2a": b - 2 * a,
    }


def classify(sdv: SquaredDistanceVector, tol: float = EQUALITY_TOL) -> GeometryClass:
    """Most specific label among Square > Rhombus > IsoscelesTrapezoid > Kite > GenericConvex.

    Equalities are tested on sdv / a.  Kite means symmetry across a
    diagonal: across q1q3 when a = c and d = f, across q2q4 when a = d
    and c = f.
    """
    try:
        oriented_areas_from_distances(sdv)
    except DziobekError as exc:
        raise DomainError(f"classify needs a convex configuration in order 1-2-3-4: {exc}") from exc
    m = _shape_margins(sdv)

    def eq(*keys):
        return all(abs(m[k]) <= tol for k in keys)

    kite13 = eq("a=c", "d=f")
    kite24 = eq("a=d", "c=f")
    rhombus = eq("a=c", "a=d", "a=f")
    square = rhombus and eq("b=e", "b=2a")
    trapezoid = eq("b=e", "c=d")
    if square:
        label = SQUARE
    elif rhombus:
        label = RHOMBUS
    elif trapezoid:
        label = ISOSCELES_TRAPEZOID
    elif kite13 or kite24:
        label = KITE
    else:
        label = GENERIC
    return GeometryClass(label, {k: float(v) for k, v in m.items()})


def classify_configuration(config: PlanarConfiguration, tol: float = EQUALITY_TOL) -> GeometryClass:
    from .geometry import squared_distances

    shape = convexity(config)
    if shape != CONVEX:
        return GeometryClass(shape, {})
    return classify(squared_distances(config), tol)


# ---------------------------------------------------------------- area algebra


def area_ordering_mask(D: np.ndarray) -> np.ndarray:
    """Rows of an (N, 4) area array with Delta3 < Delta1 < 0 < Delta2 < Delta4."""
    D = np.atleast_2d(D)
    return (D[:, 2] < D[:, 0]) & (D[:, 0] < 0) & (0 < D[:, 1]) & (D[:, 1] < D[:, 3])


def factorization_errors(D: np.ndarray) -> np.ndarray:
    """Relative errors of the two factorizations, shape (N, 2).

    D1 D3 - D2 D4 = (D1 + D4)(D3 + D4)  and  D2 D3 - D1 D4 = (D2 + D4)(D3 + D4),
    both exact whenever the four areas sum to zero.
    """
    D = np.atleast_2d(D)
    d1, d2, d3, d4 = D.T
    scale = np.max(np.abs(D), axis=1) ** 2
    e1 = (d1 * d3 - d2 * d4) - (d1 + d4) * (d3 + d4)
    e2 = (d2 * d3 - d1 * d4) - (d2 + d4) * (d3 + d4)
    return np.column_stack([np.abs(e1), np.abs(e2)]) / scale[:, None]


def sign_linkage_violations(D: np.ndarray) -> np.ndarray:
    """Boolean mask of rows where, under the strict area ordering, either
    D1 D3 - D2 D4 or D2 D3 - D1 D4 disagrees in sign with D3 + D4, or
    D1 + D4 fails to be positive."""
    D = np.atleast_2d(D)
    d1, d2, d3, d4 = D.T
    pattern = area_ordering_mask(D)
    q = np.sign(d3 + d4)
    bad = (np.sign(d1 * d3 - d2 * d4) != q) | (np.sign(d2 * d3 - d1 * d4) != q) | ~(d1 + d4 > 0)
    return pattern & bad


def check_lemma_3_1(areas: OrientedAreaVector, strict_tol: float = 1e-12, weak: bool = False) -> CheckReport:
    """Delta3 < Delta1 < 0 < Delta2 < Delta4, on areas scaled by sum |Delta|.

    In weak mode the outer comparisons Delta3 <= Delta1 and Delta2 <= Delta4
    may hold with equality (the equal-mass limit).
    """
    d = areas.as_array() / areas.magnitude
    outer = np.array([d[0] - d[2], d[3] - d[1]])
    inner = np.array([-d[0], d[1]])
    outer_margin = outer + strict_tol if weak else outer - strict_tol
    margin = min(outer_margin.min(), (inner - strict_tol).min())
    return _report("area_ordering", margin, mode="weak" if weak else "strict")


def check_factorization_identities(areas: OrientedAreaVector, tol: float = 1e-12,
                                   sum_tol: float = 1e-10) -> CheckReport:
    if areas.sum_defect() > sum_tol:
        raise PreconditionError(f"areas do not sum to zero (defect {areas.sum_defect():.3e})")
    D = areas.as_array()[None, :]
    errs = factorization_errors(D)[0]
    margin = tol - errs.max()
    detail = {"error_13_24": float(errs[0]), "error_23_14": float(errs[1])}
    if area_ordering_mask(D)[0]:
        pos = (D[0, 0] + D[0, 3]) / areas.magnitude
        detail["d1_plus_d4"] = float(pos)
        if not pos > 0:
            margin = min(margin, pos - np.finfo(float).tiny)
    return _report("factorization_identities", margin, **detail)


def _solution_gate(solution):
    if not getattr(solution, "converged", False):
        raise NotApplicableError("solution is not converged")
    if not solution.multipliers.nu > 0:
        raise NotApplicableError("solution has nu <= 0")
    _, resid = fit_multipliers(solution.sdv, solution.areas, solution.masses)
    if resid > SOLUTION_GATE:
        raise NotApplicableError(f"not a central configuration (Dziobek residual {resid:.3e})")


def check_theorem(solution, which: str, tol: float = EQUALITY_TOL) -> CheckReport:
    """Equal diagonals (or equal lateral sides) forces an isosceles trapezoid.

    Raises NotApplicableError for objects that are not converged central
    configurations; returns a vacuous pass when the hypothesis fails.
    """
    _solution_gate(solution)
    sdv, areas = solution.sdv, solution.areas
    m = _shape_margins(sdv)
    if which == "equal_diagonals":
        hyp, other = abs(m["b=e"]), abs(m["c=d"])
    elif which == "equal_laterals":
        hyp, other = abs(m["c=d"]), abs(m["b=e"])
    else:
        raise ValueError(f"unknown theorem {which!r}")
    name = f"theorem_{which}"
    if hyp > tol:
        return _report(name, hyp - tol, vacuous=True)
    d = areas.as_array() / areas.magnitude
    devs = {
        "d3+d4": abs(d[2] + d[3]),
        "d1+d2": abs(d[0] + d[1]),
        "other_equality": other,
    }
    label = classify(sdv, tol).label
    margin = tol - max(devs.values())
    if label not in (ISOSCELES_TRAPEZOID, SQUARE):
        margin = min(margin, -tol)
    return _report(name, margin, vacuous=False, label=label, **{k: float(v) for k, v in devs.items()})


def check_lemma_case_analysis(solution, tol: float = EQUALITY_TOL) -> CheckReport:
    """|D3 + D4|, |b - e| and |c - d| vanish together, and the sign linkages
    of the case analysis hold (products vs D3 + D4, distances vs products)."""
    _solution_gate(solution)
    sdv, areas = solution.sdv, solution.areas
    D = areas.as_array()
    mag = areas.magnitude
    a = sdv.a
    z = np.array([abs(D[2] + D[3]) / mag, abs(sdv.b - sdv.e) / a, abs(sdv.c - sdv.d) / a])
    if np.all(z < tol):
        margin = tol - z.max()
    elif np.all(z >= tol):
        margin = z.min() - tol
    else:
        margin = -float(np.ptp(z)) - np.finfo(float).tiny

    def sgn(x, ref):
        return 0 if abs(x) <= tol * ref else int(np.sign(x))

    detail = {"d3+d4": float(z[0]), "b-e": float(z[1]), "c-d": float(z[2])}
    if area_ordering_mask(D)[0]:
        q = sgn(D[2] + D[3], mag)
        p1 = sgn(D[0] * D[2] - D[1] * D[3], mag**2)
        p2 = sgn(D[1] * D[2] - D[0] * D[3], mag**2)
        be = sgn(sdv.b - sdv.e, a)
        dc = sgn(sdv.d - sdv.c, a)
        linked = p1 == q and p2 == q and be == p1 and dc == p2
        detail["sign_linkage"] = linked
        if not linked:
            margin = min(margin, -tol)
    return _report("case_analysis", margin, **detail)


def diagnostics(solution, tol: float = EQUALITY_TOL) -> dict:
    """Every symmetry predicate evaluated on a converged solution."""
    sdv, areas = solution.sdv, solution.areas
    alpha = solution.alpha
    mult = solution.multipliers
    label = classify(sdv, tol).label
    scale = sdv.scale
    out = {
        "class": _report("class", 0.0 if label in (ISOSCELES_TRAPEZOID, SQUARE) else -1.0, label=label),
        "nu_positive": _report("nu_positive", mult.nu, nu=mult.nu),
        "lambda_cc_negative": _report("lambda_cc_negative", -mult.lambda_cc),
        "area_sum": _report("area_sum", 1e-12 - areas.sum_defect(), defect=areas.sum_defect()),
        "planarity": _report("planarity", 1e-10 - abs(cayley_menger(sdv)) / scale**3),
        "albouy": _report("albouy", 1e-10 - albouy_spread(sdv, areas)),
        "area_ordering": check_lemma_3_1(areas, weak=alpha is None or alpha > WEAK_ORDERING_ALPHA),
        "factorization_identities": check_factorization_identities(areas),
        "theorem_equal_diagonals": check_theorem(solution, "equal_diagonals", tol),
        "theorem_equal_laterals": check_theorem(solution, "equal_laterals", tol),
        "case_analysis": check_lemma_case_analysis(solution, tol),
    }
    if alpha is not None and alpha < 1:
        out["side_f_lt_a"] = _report("side_f_lt_a", (sdv.a - sdv.f) / sdv.a)
    worst = max(mass_scaling_check(solution.configuration, z) for z in (0.5, 2.0, 8.0))
    out["mass_scaling"] = _report("mass_scaling", 1e-10 - worst, worst=worst)
    return out
