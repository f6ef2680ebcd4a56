"""Direct laboratory-frame integrator of the MB system (cross-validation oracle).

Grid ``t_k = k D``, ``x_j = j D`` with equal steps, so transport of ``E``
along ``t - x = const`` is an index shift.  Per step:

* ``E`` along characteristics with the trapezoidal source ``int n rho``;
* the Bloch pair ``(rho, N)`` at each ``(x, lam)`` in the frame rotating
  with ``exp(-2i lam t)``, where it is a pure rotation of ``(Re, Im, N)``
  advanced by the Cayley (implicit midpoint) map.  The map preserves
  ``N^2 + |rho|^2`` exactly and is second order.

The implicit coupling of the two updates is resolved by fixed-point
iteration.  The light front ``t = x`` carries a jump of ``E`` of constant
size ``A0``: values on the diagonal are stored as the value ahead of the
front (zero), and the value behind it (``A0``) drives the Bloch step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from mbrh.broadening import BroadeningProfile, make_profile


class OracleError(RuntimeError):
    """Numerical abort of the direct integrator."""


@dataclass
class SimGrid:
    T: float
    L: float
    delta: float
    n_lambda: int = 64

    def __post_init__(self):
        if not (self.T > 0 and self.L > 0 and self.delta > 0 and self.n_lambda > 0):
            raise ValueError("T, L, delta and n_lambda must be positive")
        nt, nx = self.T / self.delta, self.L / self.delta
        if abs(nt - round(nt)) > 1e-9 * nt or abs(nx - round(nx)) > 1e-9 * nx:
            raise ValueError("T and L must be integer multiples of delta")

    @property
    def nt(self) -> int:
        return int(round(self.T / self.delta))

    @property
    def nx(self) -> int:
        return int(round(self.L / self.delta))

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.delta

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.delta


@dataclass
class OracleSolution:
    """``E`` on the full grid; ``rho``, ``N`` on the stored time slices."""

    grid: SimGrid
    E: np.ndarray
    lam: np.ndarray
    weights: np.ndarray
    stored_t: np.ndarray
    rho: np.ndarray
    N: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    front_value: complex = 0j

    def interpolate(self, t, x) -> np.ndarray:
        """Piecewise-linear interpolation of ``E`` on triangles split along ``t = x``.

        No triangle straddles the light front.  Points strictly behind it
        see the behind-front value on diagonal nodes; points on or ahead of
        it see the stored lattice values.
        """
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        g = self.grid
        if np.any(t < -1e-12) or np.any(x < -1e-12) or np.any(t > g.T + 1e-12) \
                or np.any(x > g.L + 1e-12):
            raise ValueError("points outside the oracle grid")
        u, v = t / g.delta, x / g.delta
        k = np.clip(np.floor(u).astype(int), 0, g.nt - 1)
        j = np.clip(np.floor(v).astype(int), 0, g.nx - 1)
        a, b = u - k, v - j
        behind = t - x > 1e-12 * g.delta

        def node(kk, jj):
            val = self.E[kk, jj]
            return np.where(behind & (kk == jj), self.front_value, val)

        e00, e11 = node(k, j), node(k + 1, j + 1)
        lower = a >= b
        out = np.where(lower,
                       (1 - a) * e00 + (a - b) * node(k + 1, j) + b * e11,
                       (1 - b) * e00 + (b - a) * node(k, j + 1) + a * e11)
        return out


def _cayley(a, y):
    """Apply ``(I - A)^{-1} (I + A)`` with ``A v = a x v`` to ``y`` (last axis of size 3)."""
    axy = np.cross(a, y)
    return y + 2.0 / (1.0 + np.sum(a * a, -1))[..., None] * (axy + np.cross(a, axy))


def integrate_mb(grid: SimGrid, profile: BroadeningProfile, A0: float, omega0: float,
                 store_times=(), iterations: int = 3, drift_factor: float = 10.0) -> OracleSolution:
    """March the MB system from trivial initial data with boundary ``A0 exp(i omega0 t)``."""
    lam, wn = profile.quadrature(grid.n_lambda)
    mass = float(np.sum(wn))
    if abs(mass - 1.0) > 1e-8:
        raise ValueError(f"lambda quadrature integrates n to {mass!r}, not 1")
    D = grid.delta
    nt, nx = grid.nt, grid.nx
    x_idx = np.arange(nx + 1)
    E = np.zeros((nt + 1, nx + 1), dtype=complex)
    rho = np.zeros((nx + 1, lam.size), dtype=complex)
    N = -np.ones((nx + 1, lam.size))
    store_k = sorted({int(round(s / D)) for s in store_times})
    stored_rho, stored_N = [], []
    if 0 in store_k:
        stored_rho.append(rho.copy())
        stored_N.append(N.copy())
    rot = np.exp(-2j * lam * D)
    half = np.exp(1j * lam * D)  # midpoint factor of the rotating frame
    S = np.zeros(nx + 1, dtype=complex)  # source at the current level
    # estimated local drift of the Cayley map is zero; allow for roundoff growth
    drift_limit = drift_factor * max(nt, 1) * 1e-15 * lam.size + 1e-12
    for k in range(nt):
        # field behind the front at level k: the diagonal carries A0
        Ek = E[k].copy()
        if k <= nx:
            Ek[k] = A0
        # transport with an explicit predictor for the new source
        Enew = np.zeros(nx + 1, dtype=complex)
        Enew[0] = A0 * np.exp(1j * omega0 * (k + 1) * D)
        Enew[1:] = Ek[:-1] + D * S[:-1]
        active = x_idx <= k  # columns behind or on the front at level k
        y0 = np.stack([rho.real, rho.imag, N], -1)
        for _ in range(iterations):
            Emid = 0.5 * (Ek + Enew)[:, None] * half[None, :]
            Emid = np.where(active[:, None], Emid, 0.0)
            a = 0.5 * D * np.stack([-Emid.imag, Emid.real, np.zeros_like(Emid.real)], -1)
            y1 = _cayley(a, y0)
            rho_new = (y1[..., 0] + 1j * y1[..., 1]) * rot[None, :]
            S_new = rho_new @ wn
            Enew[1:] = Ek[:-1] + 0.5 * D * (S[:-1] + S_new[1:])
        rho, N, S = rho_new, y1[..., 2], S_new
        if k + 1 <= nx:
            Enew[k + 1:] = 0.0  # on and ahead of the front
        E[k + 1] = Enew
        if not np.all(np.isfinite(Enew)):
            raise OracleError(f"non-finite field at step {k + 1}")
        if k + 1 in store_k:
            stored_rho.append(rho.copy())
            stored_N.append(N.copy())
    drift = float(np.max(np.abs(N**2 + np.abs(rho) ** 2 - 1.0)))
    if drift > drift_limit:
        raise OracleError(f"normalization drift {drift:.3e} exceeds {drift_limit:.3e}")
    diag = {"delta": D, "nt": nt, "nx": nx, "n_lambda": int(lam.size),
            "normalization_drift": drift, "lambda_mass": mass}
    return OracleSolution(grid, E, lam, wn, np.asarray(store_k, float) * D,
                          np.asarray(stored_rho), np.asarray(stored_N), diag, complex(A0))


def compare_fields(oracle_sol: OracleSolution, t, x, E_rh, rho_rh=None) -> dict:
    """Discrepancy between oracle and RH fields at the points ``(t, x)``.

    ``rho_rh`` (optional) has shape ``(P, n_lambda)`` on the oracle's
    lambda nodes and is compared against stored oracle slices.
    """
    t = np.atleast_1d(np.asarray(t, float))
    x = np.atleast_1d(np.asarray(x, float))
    E_rh = np.atleast_1d(np.asarray(E_rh, complex))
    if not (t.shape == x.shape == E_rh.shape):
        raise ValueError("mismatched sample shapes")
    g = oracle_sol.grid
    if np.any(t > g.T + 1e-12) or np.any(x > g.L + 1e-12) or np.any(t < 0) or np.any(x < 0):
        raise ValueError("samples outside the oracle grid")
    E_or = oracle_sol.interpolate(t, x)
    err = np.abs(E_or - E_rh)
    report = {"max_E": float(err.max()), "rms_E": float(np.sqrt(np.mean(err**2))),
              "table": [{"t": float(a), "x": float(b), "E_oracle": complex(c), "E_rh": complex(d),
                         "abs_error": float(e)}
                        for a, b, c, d, e in zip(t, x, E_or, E_rh, err)]}
    if rho_rh is not None:
        D = g.delta
        errs = []
        for i, (a, b) in enumerate(zip(t, x)):
            ks = np.nonzero(np.isclose(oracle_sol.stored_t, a, atol=1e-12))[0]
            j = b / D
            if ks.size == 0 or abs(j - round(j)) > 1e-9:
                raise ValueError("density comparison needs samples on stored grid points")
            errs.append(np.abs(oracle_sol.rho[ks[0], int(round(j))] - rho_rh[i]).max())
        report["max_rho"] = float(np.max(errs))
    return report


class OracleIntegrator(BaseEstimator):
    """Estimator wrapper: ``fit`` simulates, ``predict`` interpolates ``E``.

    ``predict`` takes an ``(n, 2)`` array of ``(t, x)`` pairs.
    """

    def __init__(self, A0: float = 1.0, omega0: float = 1.0, broadening: dict | None = None,
                 T: float = 2.0, L: float = 1.0, delta: float = 1.0 / 256, n_lambda: int = 64,
                 iterations: int = 3):
        self.A0 = A0
        self.omega0 = omega0
        self.broadening = broadening
        self.T = T
        self.L = L
        self.delta = delta
        self.n_lambda = n_lambda
        self.iterations = iterations

    def fit(self, X=None, y=None):
        spec = self.broadening if self.broadening is not None else {"type": "box", "lambda": 1.0}
        prof = make_profile(spec)
        grid = SimGrid(self.T, self.L, self.delta, self.n_lambda)
        self.solution_ = integrate_mb(grid, prof, self.A0, self.omega0, iterations=self.iterations)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "solution_")
        X = np.asarray(X, float).reshape(-1, 2)
        return self.solution_.interpolate(X[:, 0], X[:, 1])
