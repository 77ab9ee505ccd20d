"""Geometric kernel for planar four-body configurations.

Bodies are labelled 1..4 in the cyclic convex order q1 (bottom left),
q2 (bottom right), q3 (top right), q4 (top left).  Squared mutual
distances are kept in the fixed order

    a = r12^2, b = r13^2, c = r14^2, d = r23^2, e = r24^2, f = r34^2

and the oriented sub-triangle areas carry the sign pattern (-, +, -, +)
for a counter-clockwise convex quadrilateral in that order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CollisionError, InconsistentConvexityError, NotRealizableError

PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
PAIR_NAMES = ("a", "b", "c", "d", "e", "f")

# indices into the (a..f) vector of the three squared sides of the triangle
# left when body i is deleted
SUBTRIANGLE_SIDES = ((3, 4, 5), (1, 2, 5), (0, 2, 4), (0, 1, 3))
AREA_SIGNS = np.array([-1.0, 1.0, -1.0, 1.0])

HERON_CLAMP = 1e-14
CONVEXITY_TOL = 1e-8


def _readonly(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PlanarConfiguration:
    """Four planar positions with four positive masses."""

    positions: np.ndarray
    masses: np.ndarray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        pos = _readonly(self.positions)
        m = _readonly(self.masses)
        if pos.shape != (4, 2):
            raise ValueError(f"positions must have shape (4, 2), got {pos.shape}")
        if m.shape != (4,):
            raise ValueError(f"masses must have shape (4,), got {m.shape}")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(m))):
            raise ValueError("positions and masses must be finite")
        if np.any(m <= 0):
            raise ValueError("masses must be strictly positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "masses", m)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def center_of_mass(self) -> np.ndarray:
        return self.masses @ self.positions / self.total_mass

    @property
    def diameter(self) -> float:
        diffs = self.positions[:, None, :] - self.positions[None, :, :]
        return float(np.sqrt((diffs**2).sum(-1).max()))

    @property
    def com_offset(self) -> float:
        """Relative center-of-mass offset ||sum m_i q_i|| / (M * diameter)."""
        diam = self.diameter
        if diam == 0:
            return 0.0
        return float(np.linalg.norm(self.masses @ self.positions) / (self.total_mass * diam))

    def centered(self) -> "PlanarConfiguration":
        return PlanarConfiguration(self.positions - self.center_of_mass, self.masses, self.label)

    def scaled(self, length: float = 1.0, mass: float = 1.0) -> "PlanarConfiguration":
        return PlanarConfiguration(self.positions * length, self.masses * mass, self.label)

    def with_masses(self, masses) -> "PlanarConfiguration":
        return PlanarConfiguration(self.positions, masses, self.label)


@dataclass(frozen=True)
class SquaredDistanceVector:
    """Dziobek coordinates (a, b, c, d, e, f)."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    @classmethod
    def from_array(cls, values) -> "SquaredDistanceVector":
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != (6,):
            raise ValueError(f"expected 6 squared distances, got {values.shape}")
        return cls(*(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d, self.e, self.f])

    def matrix(self) -> np.ndarray:
        """Symmetric 4x4 matrix of squared distances with zero diagonal."""
        r2 = np.zeros((4, 4))
        for k, (i, j) in enumerate(PAIRS):
            r2[i, j] = r2[j, i] = self.as_array()[k]
        return r2

    @property
    def scale(self) -> float:
        """Largest squared distance (the squared diameter)."""
        return float(np.max(np.abs(self.as_array())))

    def scaled(self, k: float) -> "SquaredDistanceVector":
        return SquaredDistanceVector.from_array(k * self.as_array())

    def normalized(self) -> "SquaredDistanceVector":
        """Gauge-fixed copy with a = 1."""
        return SquaredDistanceVector.from_array(self.as_array() / self.a)


@dataclass(frozen=True)
class OrientedAreaVector:
    d1: float
    d2: float
    d3: float
    d4: float

    @classmethod
    def from_array(cls, values) -> "OrientedAreaVector":
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != (4,):
            raise ValueError(f"expected 4 areas, got {values.shape}")
        return cls(*(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.array([self.d1, self.d2, self.d3, self.d4])

    @property
    def total(self) -> float:
        return self.d1 + self.d2 + self.d3 + self.d4

    @property
    def magnitude(self) -> float:
        return float(np.abs(self.as_array()).sum())

    def sum_defect(self) -> float:
        """|sum of areas| / sum of |areas|; zero for degenerate input."""
        mag = self.magnitude
        return abs(self.total) / mag if mag > 0 else 0.0


def squared_distances(config: PlanarConfiguration) -> SquaredDistanceVector:
    q = config.positions
    vals = np.array([((q[i] - q[j]) ** 2).sum() for i, j in PAIRS])
    if np.any(vals <= 0):
        k = int(np.argmin(vals))
        i, j = PAIRS[k]
        raise CollisionError(f"bodies {i + 1} and {j + 1} coincide")
    return SquaredDistanceVector.from_array(vals)


def _signed_triangle_area(p, q, r) -> float:
    return 0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))


def oriented_areas_from_positions(config: PlanarConfiguration) -> OrientedAreaVector:
    """Signed areas of the triangles left after deleting each body.

    Delta_i = (-1)^i * area(remaining vertices in increasing label order),
    which gives (-, +, -, +) for a counter-clockwise convex quadrilateral.
    """
    q = config.positions
    out = []
    for i in range(4):
        rest = [q[j] for j in range(4) if j != i]
        out.append(AREA_SIGNS[i] * _signed_triangle_area(*rest))
    return OrientedAreaVector.from_array(out)


def heron_discriminant(p: float, q: float, r: float) -> float:
    """16 * area^2 of a triangle with squared side lengths p, q, r."""
    return 4.0 * p * q - (p + q - r) ** 2


def unsigned_areas_from_distances(sdv: SquaredDistanceVector) -> np.ndarray:
    s = sdv.as_array()
    band = HERON_CLAMP * sdv.scale**2
    out = np.empty(4)
    for i, (x, y, z) in enumerate(SUBTRIANGLE_SIDES):
        disc = heron_discriminant(s[x], s[y], s[z])
        if disc < 0:
            if disc < -band:
                raise NotRealizableError(
                    f"triangle opposite body {i + 1} violates the triangle inequality "
                    f"(16*area^2 = {disc:.3e})"
                )
            disc = 0.0
        out[i] = 0.25 * np.sqrt(disc)
    return out


def oriented_areas_from_distances(
    sdv: SquaredDistanceVector, tol: float = CONVEXITY_TOL
) -> OrientedAreaVector:
    """Heron magnitudes with the convex sign pattern forced on them.

    Raises InconsistentConvexityError when the forced signs break the
    area-sum identity, i.e. the distances do not describe a convex
    quadrilateral in the cyclic order 1-2-3-4.
    """
    areas = OrientedAreaVector.from_array(AREA_SIGNS * unsigned_areas_from_distances(sdv))
    if areas.sum_defect() > tol:
        raise InconsistentConvexityError(
            f"area sum defect {areas.sum_defect():.3e} under convex signs; "
            "configuration is not convex in order 1-2-3-4"
        )
    return areas


def area_jacobian(sdv: SquaredDistanceVector) -> np.ndarray:
    """d Delta_i / d(a..f) for the convex-signed Heron areas, shape (4, 6)."""
    s = sdv.as_array()
    mags = unsigned_areas_from_distances(sdv)
    jac = np.zeros((4, 6))
    for i, sides in enumerate(SUBTRIANGLE_SIDES):
        if mags[i] == 0:
            raise NotRealizableError(f"triangle opposite body {i + 1} is degenerate")
        p, q, r = (s[k] for k in sides)
        # d|A|/dp = (q + r - p) / (16 |A|), cyclically
        for k, (x, y, z) in zip(sides, ((p, q, r), (q, r, p), (r, p, q))):
            jac[i, k] = AREA_SIGNS[i] * (y + z - x) / (16.0 * mags[i])
    return jac


def cayley_menger_matrix(sdv: SquaredDistanceVector) -> np.ndarray:
    a, b, c, d, e, f = sdv.as_array()
    return np.array(
        [
            [0.0, 1.0, 1.0, 1.0, 1.0],
            [1.0, 0.0, a, b, c],
            [1.0, a, 0.0, d, e],
            [1.0, b, d, 0.0, f],
            [1.0, c, e, f, 0.0],
        ]
    )


def cayley_menger(sdv: SquaredDistanceVector) -> float:
    return float(np.linalg.det(cayley_menger_matrix(sdv)))


def cayley_menger_gradient(sdv: SquaredDistanceVector) -> np.ndarray:
    """Analytic partial derivatives of S with respect to (a..f).

    Each squared distance sits at two symmetric entries (i, j) and (j, i),
    so dS/dr_ij^2 is twice the (i, j) cofactor.  Minors are evaluated
    directly so the result stays valid where S itself vanishes.
    """
    m = cayley_menger_matrix(sdv)
    grad = np.empty(6)
    for k, (i, j) in enumerate(PAIRS):
        row, col = i + 1, j + 1
        minor = np.delete(np.delete(m, row, axis=0), col, axis=1)
        grad[k] = 2.0 * (-1) ** (row + col) * np.linalg.det(minor)
    return grad


def dziobek_products(areas: OrientedAreaVector) -> np.ndarray:
    """Delta_i * Delta_j in pair order (a..f)."""
    d = areas.as_array()
    return np.array([d[i] * d[j] for i, j in PAIRS])


def potential(config: PlanarConfiguration) -> float:
    """Newtonian potential U = sum m_i m_j / r_ij (G = 1)."""
    r2 = squared_distances(config).as_array()
    m = config.masses
    return float(sum(m[i] * m[j] / np.sqrt(r2[k]) for k, (i, j) in enumerate(PAIRS)))


def moment_of_inertia(config: PlanarConfiguration) -> float:
    """I = (1/M) sum_{i<j} m_i m_j r_ij^2; translation invariant."""
    r2 = squared_distances(config).as_array()
    m = config.masses
    return float(sum(m[i] * m[j] * r2[k] for k, (i, j) in enumerate(PAIRS)) / m.sum())


def polar_moment(config: PlanarConfiguration) -> float:
    """sum m_i |q_i|^2 about the origin; equals moment_of_inertia when centered."""
    return float(config.masses @ (config.positions**2).sum(axis=1))


def albouy_t(sdv: SquaredDistanceVector, areas: OrientedAreaVector) -> np.ndarray:
    """t_l = sum_i Delta_i r_il^2 for l = 1..4; all equal for planar configurations."""
    return sdv.matrix() @ areas.as_array()


def albouy_spread(sdv: SquaredDistanceVector, areas: OrientedAreaVector) -> float:
    """max |t_l - mean(t)| relative to (sum |Delta|) * (max squared distance)."""
    t = albouy_t(sdv, areas)
    denom = areas.magnitude * sdv.scale
    return float(np.max(np.abs(t - t.mean())) / denom) if denom > 0 else 0.0


def embed(sdv: SquaredDistanceVector, masses=(1.0, 1.0, 1.0, 1.0)) -> PlanarConfiguration:
    """Realize a convex sdv in the plane with q1q2 horizontal, then center it.

    q3 and q4 are placed above the base so the orientation is
    counter-clockwise, matching the (-, +, -, +) area pattern.
    """
    a, b, c, d, e, _ = sdv.as_array()
    base = np.sqrt(a)

    def apex(r1sq, r2sq):
        x = (r1sq - r2sq + a) / (2.0 * base)
        y2 = r1sq - x * x
        if y2 < -HERON_CLAMP * sdv.scale:
            raise NotRealizableError("cannot embed: triangle inequality violated")
        return x, np.sqrt(max(y2, 0.0))

    q3 = apex(b, d)
    q4 = apex(c, e)
    pos = np.array([[0.0, 0.0], [base, 0.0], q3, q4])
    return PlanarConfiguration(pos, masses).centered()


def random_convex_configuration(
    rng: np.random.Generator,
    masses=(1.0, 1.0, 1.0, 1.0),
    box: float = 1.0,
    min_separation: float = 0.05,
    max_tries: int = 100_000,
) -> PlanarConfiguration:
    """Uniform vertices in [0, box]^2, rejected until convex in order 1-2-3-4
    with all pairwise distances at least ``min_separation * box``."""
    for _ in range(max_tries):
        pos = rng.uniform(0.0, box, size=(4, 2))
        cfg = PlanarConfiguration(pos, masses)
        r2 = np.array([((pos[i] - pos[j]) ** 2).sum() for i, j in PAIRS])
        if r2.min() < (min_separation * box) ** 2:
            continue
        signs = np.sign(oriented_areas_from_positions(cfg).as_array())
        if np.array_equal(signs, AREA_SIGNS):
            return cfg
    raise RuntimeError("rejection sampling failed to find a convex configuration")
