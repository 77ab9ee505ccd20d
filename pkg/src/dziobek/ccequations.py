"""Residuals of the central-configuration equations.

Two formulations are provided.  In position space a configuration is
central when the mass-weighted gravitational acceleration of every body
equals ``lambda_cc * q_i``.  In Dziobek coordinates the conditions become
six scalar equations

    m_i m_j phi'(r_ij^2) = nu * Delta_i Delta_j + mu * m_i m_j,   phi(s) = s^(-1/2)

which are linear in the multipliers (nu, mu).  ``lambda_cc`` and ``nu``
are unrelated quantities: the first is the scalar of the position-space
definition (negative), the second is 32 times the multiplier attached to
the planarity constraint (positive on convex solutions).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateFitError, DomainError, NotCenteredError
from .geometry import (
    PAIRS,
    OrientedAreaVector,
    PlanarConfiguration,
    SquaredDistanceVector,
    dziobek_products,
    polar_moment,
    potential,
    squared_distances,
)

CENTERING_TOL = 1e-10


@dataclass(frozen=True)
class Multipliers:
    nu: float
    mu: float
    lambda_cc: Optional[float] = None


@dataclass(frozen=True)
class ResidualVector:
    """Scaled residual entries in a fixed equation order and their max-norm."""

    entries: np.ndarray
    norm: float

    @classmethod
    def from_entries(cls, entries) -> "ResidualVector":
        entries = np.asarray(entries, dtype=float)
        entries.setflags(write=False)
        norm = float(np.max(np.abs(entries))) if entries.size else 0.0
        return cls(entries, norm)


def phi_prime(s):
    """Derivative of s^(-1/2): -(1/2) s^(-3/2); strictly increasing on s > 0."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr <= 0):
        raise DomainError("phi_prime requires s > 0")
    out = -0.5 * s_arr**-1.5
    return float(out) if out.ndim == 0 else out


def accelerations(config: PlanarConfiguration) -> np.ndarray:
    """M^-1 dU/dq, shape (4, 2)."""
    q = config.positions
    m = config.masses
    squared_distances(config)  # collision check
    diff = q[None, :, :] - q[:, None, :]  # diff[i, j] = q_j - q_i
    r2 = (diff**2).sum(-1)
    np.fill_diagonal(r2, 1.0)
    inv_r3 = r2**-1.5
    np.fill_diagonal(inv_r3, 0.0)
    return np.einsum("ij,j,ijk->ik", inv_r3, m, diff)


def acceleration_jacobian(config: PlanarConfiguration) -> np.ndarray:
    """d(accelerations)/d(positions) as an (8, 8) matrix in row-major (body, axis) order."""
    q = config.positions
    m = config.masses
    jac = np.zeros((4, 2, 4, 2))
    eye = np.eye(2)
    for i in range(4):
        for j in range(4):
            if i == j:
                continue
            d = q[j] - q[i]
            r2 = d @ d
            block = m[j] * (eye / r2**1.5 - 3.0 * np.outer(d, d) / r2**2.5)
            jac[i, :, j, :] += block
            jac[i, :, i, :] -= block
    return jac.reshape(8, 8)


def _require_centered(config: PlanarConfiguration, tol: float = CENTERING_TOL):
    if config.com_offset > tol:
        raise NotCenteredError(
            f"configuration is not centered (relative offset {config.com_offset:.3e})"
        )


def position_residual(config: PlanarConfiguration, lambda_cc: float) -> ResidualVector:
    """Entries of M^-1 dU/dq - lambda_cc q, divided by the largest acceleration
    component so the norm is invariant under rescaling lengths and masses."""
    _require_centered(config)
    acc = accelerations(config)
    scale = np.max(np.abs(acc))
    return ResidualVector.from_entries(((acc - lambda_cc * config.positions) / scale).ravel())


def lambda_from_config(config: PlanarConfiguration) -> float:
    """lambda_cc = -U / sum m_i |q_i|^2, from the degree -1 homogeneity of U."""
    _require_centered(config)
    return -potential(config) / polar_moment(config)


def _scaled(entries, sdv: SquaredDistanceVector) -> ResidualVector:
    return ResidualVector.from_entries(np.asarray(entries) / abs(phi_prime(sdv.scale)))


def _checked_distances(sdv: SquaredDistanceVector) -> np.ndarray:
    s = sdv.as_array()
    if np.any(s <= 0):
        raise DomainError("squared distances must be positive")
    return s


def family_masses(alpha: float) -> np.ndarray:
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    return np.array([1.0, 1.0, alpha, alpha])


def pair_mass_products(masses) -> np.ndarray:
    m = np.asarray(masses, dtype=float)
    return np.array([m[i] * m[j] for i, j in PAIRS])


def dziobek_entries(sdv, areas, nu, mu, masses) -> np.ndarray:
    """Unscaled per-pair residuals phi'(r^2) - nu Delta_i Delta_j / (m_i m_j) - mu."""
    s = _checked_distances(sdv)
    return phi_prime(s) - nu * dziobek_products(areas) / pair_mass_products(masses) - mu


def dziobek_residual(
    sdv: SquaredDistanceVector, areas: OrientedAreaVector, nu: float, mu: float, alpha: float
) -> ResidualVector:
    """The six equations for masses (1, 1, alpha, alpha), in pair order a..f."""
    s = _checked_distances(sdv)
    p = dziobek_products(areas)
    coef = np.array([1.0, 1 / alpha, 1 / alpha, 1 / alpha, 1 / alpha, 1 / alpha**2])
    return _scaled(phi_prime(s) - nu * coef * p - mu, sdv)


def general_dziobek_residual(
    sdv: SquaredDistanceVector, areas: OrientedAreaVector, nu: float, mu: float, masses
) -> ResidualVector:
    """m_i m_j phi'(r_ij^2) - nu Delta_i Delta_j - mu m_i m_j for arbitrary masses.

    Entries are not divided by the mass products; divide them to compare with
    ``dziobek_residual``.
    """
    s = _checked_distances(sdv)
    mm = pair_mass_products(masses)
    return _scaled(mm * phi_prime(s) - nu * dziobek_products(areas) - mu * mm, sdv)


def fit_multipliers(
    sdv: SquaredDistanceVector,
    areas: OrientedAreaVector,
    masses,
    config: Optional[PlanarConfiguration] = None,
) -> tuple[Multipliers, float]:
    """Least-squares (nu, mu) for the six mass-divided Dziobek equations.

    Returns the multipliers and the scaled max-norm residual after the fit.
    ``lambda_cc`` is filled in when a centered embedding is supplied.
    """
    s = _checked_distances(sdv)
    coef = dziobek_products(areas) / pair_mass_products(masses)
    spread = np.ptp(coef)
    if not spread > 1e-12 * max(np.max(np.abs(coef)), np.finfo(float).tiny):
        raise DegenerateFitError("all area-product coefficients are equal; (nu, mu) not identifiable")
    rhs = phi_prime(s)
    design = np.column_stack([coef, np.ones(6)])
    # column scaling keeps the normal equations well conditioned across alpha
    col = np.max(np.abs(design), axis=0)
    sol, *_ = np.linalg.lstsq(design / col, rhs, rcond=None)
    nu, mu = sol / col
    resid = _scaled(rhs - nu * coef - mu, sdv)
    lam = lambda_from_config(config) if config is not None else None
    return Multipliers(float(nu), float(mu), lam), resid.norm


def mass_scaling_check(config: PlanarConfiguration, zeta: float) -> float:
    """Residual of the rescaled system (masses / zeta, lengths * zeta^(-1/3))
    evaluated with the unscaled lambda_cc."""
    if not zeta > 0:
        raise DomainError("zeta must be positive")
    lam = lambda_from_config(config)
    scaled = config.scaled(length=zeta ** (-1.0 / 3.0), mass=1.0 / zeta)
    return position_residual(scaled, lam).norm
