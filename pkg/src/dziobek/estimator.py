"""scikit-learn compatible wrappers.

``DziobekTransformer`` maps flattened planar positions (n, 8) to Dziobek
coordinates and/or oriented areas, so it can sit in a ``Pipeline``.
``CentralConfigurationSolver`` treats mass ratios as samples: ``fit``
solves along a continuation path and ``predict`` returns the gauge-fixed
squared distances (a = 1) of the convex central configuration.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .ccequations import family_masses
from .errors import DziobekError
from .geometry import (
    PlanarConfiguration,
    embed,
    oriented_areas_from_positions,
    squared_distances,
)
from .solver import SolveOptions, default_initial_sdv, solve_dziobek, solve_position


class DziobekTransformer(TransformerMixin, BaseEstimator):
    """Positions -> squared mutual distances (a..f) and/or oriented areas.

    Parameters
    ----------
    output : {"sdv", "areas", "both"}
    normalize : bool
        Divide every output row by ``a`` (the squared q1q2 distance).
    """

    def __init__(self, output="sdv", normalize=False):
        self.output = output
        self.normalize = normalize

    def fit(self, X, y=None):
        X = check_array(X)
        if X.shape[1] != 8:
            raise ValueError(f"expected 8 columns (x1, y1, ..., x4, y4), got {X.shape[1]}")
        if self.output not in ("sdv", "areas", "both"):
            raise ValueError(f"unknown output {self.output!r}")
        self.n_features_in_ = 8
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        rows = []
        for row in X:
            cfg = PlanarConfiguration(row.reshape(4, 2), np.ones(4))
            sdv = squared_distances(cfg).as_array()
            areas = oriented_areas_from_positions(cfg).as_array()
            if self.normalize:
                areas = areas / sdv[0]
                sdv = sdv / sdv[0]
            parts = {"sdv": [sdv], "areas": [areas], "both": [sdv, areas]}[self.output]
            rows.append(np.concatenate(parts))
        return np.array(rows)

    def get_feature_names_out(self, input_features=None):
        names = {"sdv": list("abcdef"), "areas": ["d1", "d2", "d3", "d4"]}
        names["both"] = names["sdv"] + names["areas"]
        return np.array(names[self.output], dtype=object)


class CentralConfigurationSolver(BaseEstimator):
    """Convex central configurations for masses (1, 1, alpha, alpha).

    ``fit(X)`` takes mass ratios alpha in (0, 1] (one per row) and solves
    them in decreasing order, each warm-started from the previous
    converged solution.  Failed ratios are kept in ``failures_``.
    """

    def __init__(self, method="dziobek", tol=1e-12, max_iter=60, damping=40,
                 jacobian_mode="analytic", seed=42):
        self.method = method
        self.tol = tol
        self.max_iter = max_iter
        self.damping = damping
        self.jacobian_mode = jacobian_mode
        self.seed = seed

    def _options(self):
        return SolveOptions(
            max_iterations=self.max_iter, residual_tolerance=self.tol, damping=self.damping,
            jacobian_mode=self.jacobian_mode, seed=self.seed,
        )

    @staticmethod
    def _alphas(X):
        alphas = check_array(X, ensure_2d=False).ravel()
        if np.any(alphas <= 0) or np.any(alphas > 1):
            raise ValueError("mass ratios must lie in (0, 1]")
        return alphas

    def _solve(self, alpha, guess):
        opts = self._options()
        if self.method == "dziobek":
            return solve_dziobek(alpha, guess, opts)
        if self.method == "position":
            masses = family_masses(alpha)
            return solve_position(masses, embed(guess, masses), opts)
        raise ValueError(f"unknown method {self.method!r}")

    def fit(self, X, y=None):
        alphas = self._alphas(X)
        self.solutions_ = {}
        self.failures_ = {}
        guess = None
        for alpha in sorted(set(alphas.tolist()), reverse=True):
            if guess is None:
                guess = default_initial_sdv(alpha)
            try:
                sol = self._solve(alpha, guess)
            except DziobekError as exc:
                self.failures_[alpha] = str(exc)
                continue
            self.solutions_[alpha] = sol
            guess = sol.sdv.normalized()
        self.alphas_ = np.array(sorted(self.solutions_))
        return self

    def predict(self, X):
        """Gauge-fixed (a = 1) squared distances, shape (n, 6).

        Ratios not seen during ``fit`` are solved from the nearest fitted
        solution; rows that fail are NaN.
        """
        check_is_fitted(self, "solutions_")
        alphas = self._alphas(X)
        out = np.full((alphas.size, 6), np.nan)
        for k, alpha in enumerate(alphas):
            sol = self.solutions_.get(float(alpha))
            if sol is None and self.alphas_.size:
                nearest = float(self.alphas_[np.argmin(np.abs(self.alphas_ - alpha))])
                try:
                    sol = self._solve(float(alpha), self.solutions_[nearest].sdv.normalized())
                except DziobekError:
                    sol = None
            if sol is not None:
                out[k] = sol.sdv.normalized().as_array()
        return out
