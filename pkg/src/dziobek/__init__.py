"""Convex four-body central configurations in Dziobek coordinates."""

__version__ = "0.1.0"

from .ccequations import (  # noqa: E402
    Multipliers,
    dziobek_residual,
    fit_multipliers,
    lambda_from_config,
    position_residual,
)
from .classify import classify, convexity  # noqa: E402
from .estimator import CentralConfigurationSolver, DziobekTransformer  # noqa: E402
from .geometry import (  # noqa: E402
    OrientedAreaVector,
    PlanarConfiguration,
    SquaredDistanceVector,
    albouy_t,
    cayley_menger,
    cayley_menger_gradient,
    oriented_areas_from_distances,
    oriented_areas_from_positions,
    squared_distances,
    unsigned_areas_from_distances,
)
from .solver import (  # noqa: E402
    CCSolution,
    SolveOptions,
    constrained_solve,
    continuation_sweep,
    oracle_trapezoid,
    solve_dziobek,
    solve_position,
)

__all__ = [
    "CCSolution",
    "CentralConfigurationSolver",
    "DziobekTransformer",
    "Multipliers",
    "OrientedAreaVector",
    "PlanarConfiguration",
    "SolveOptions",
    "SquaredDistanceVector",
    "albouy_t",
    "cayley_menger",
    "cayley_menger_gradient",
    "classify",
    "constrained_solve",
    "continuation_sweep",
    "convexity",
    "dziobek_residual",
    "fit_multipliers",
    "lambda_from_config",
    "oracle_trapezoid",
    "oriented_areas_from_distances",
    "oriented_areas_from_positions",
    "position_residual",
    "solve_dziobek",
    "solve_position",
    "squared_distances",
    "unsigned_areas_from_distances",
]
