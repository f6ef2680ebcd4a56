"""Estimator-style front ends for the RH pipeline."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from mbrh.broadening import BroadeningTransform, make_profile
from mbrh.oracle import OracleIntegrator
from mbrh.reconstruct import FieldSolution, RHFieldSolver
from mbrh.rhsolver import SolverConfig
from mbrh.spectral import ScatteringData, endpoint_from_boundary

__all__ = ["MaxwellBlochRHSolver", "OracleIntegrator", "sweep"]


def _check_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and X.size == 2:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError("expected an (n, 2) array of (t, x) pairs")
    if np.any(X < 0) or not np.all(np.isfinite(X)):
        raise ValueError("t and x must be finite and nonnegative")
    return X


def sweep(scat: ScatteringData, transform: BroadeningTransform, config: SolverConfig,
          t, x, lam=None, threads: int = 1, errors: str = "raise") -> FieldSolution:
    """Solve at every ``(t[i], x[i])``; chunks run on a thread pool.

    Each chunk owns its solver, so results do not depend on ``threads``.
    """
    t = np.atleast_1d(np.asarray(t, float)).ravel()
    x = np.atleast_1d(np.asarray(x, float)).ravel()
    threads = max(1, int(threads))
    chunks = np.array_split(np.arange(t.size), min(threads, max(t.size, 1)))

    def work(idx):
        return RHFieldSolver(scat, transform, config).solve(t[idx], x[idx], lam, errors)

    if threads == 1:
        parts = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, chunks))
    E = np.concatenate([p.E for p in parts]) if parts else np.zeros(0, complex)
    F = None if lam is None else np.concatenate([p.F for p in parts])
    diags = [d for p in parts for d in p.diagnostics]
    return FieldSolution(t, x, E, None if lam is None else np.asarray(lam, float), F, diags)


class MaxwellBlochRHSolver(BaseEstimator):
    """RH-based solver of the MB initial-boundary value problem.

    ``fit`` builds the spectral data for the boundary signal
    ``A0 exp(i omega0 t)`` and the broadening profile; ``predict`` maps an
    ``(n, 2)`` array of ``(t, x)`` pairs to the complex field ``E``.
    """

    def __init__(self, A0: float = 1.0, omega0: float = 1.0, broadening: dict | None = None,
                 nodes_per_piece: int = 128, clustering: float = 0.15, taper_width: float = 2.0,
                 max_lens_radius: float = 1e4, angle: float = math.pi / 4, n_jobs: int = 1):
        self.A0 = A0
        self.omega0 = omega0
        self.broadening = broadening
        self.nodes_per_piece = nodes_per_piece
        self.clustering = clustering
        self.taper_width = taper_width
        self.max_lens_radius = max_lens_radius
        self.angle = angle
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        spec = self.broadening if self.broadening is not None else {"type": "box", "lambda": 1.0}
        self.profile_ = make_profile(spec)
        self.transform_ = BroadeningTransform(self.profile_)
        self.data_ = endpoint_from_boundary(self.A0, self.omega0, self.transform_)
        self.scattering_ = ScatteringData(self.data_)
        self.config_ = SolverConfig(nodes_per_piece=int(self.nodes_per_piece),
                                    clustering=float(self.clustering),
                                    taper_width=float(self.taper_width),
                                    max_lens_radius=float(self.max_lens_radius),
                                    angle=float(self.angle))
        return self

    def solve_points(self, X, lam=None) -> FieldSolution:
        check_is_fitted(self, "scattering_")
        X = _check_points(X)
        return sweep(self.scattering_, self.transform_, self.config_, X[:, 0], X[:, 1], lam,
                     self.n_jobs)

    def predict(self, X) -> np.ndarray:
        return self.solve_points(X).E

    def predict_density(self, X, lam) -> np.ndarray:
        """``F`` with shape ``(n, len(lam), 2, 2)``."""
        return self.solve_points(X, np.atleast_1d(np.asarray(lam, float))).F
