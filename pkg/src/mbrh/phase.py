"""Phase function ``theta = z t - eta(z) x`` and its sign structure.

With ``tau = t - x`` and ``xi = x / (4 tau)`` the real part of ``i theta`` at
``z = lam + i nu`` is ``(x nu / 4) (Pi(lam, nu) - 1/xi)``.  Its zero set off
the real line is the level line ``Pi = 1/xi``: a closed oval around the
support for bounded profiles, two branches asymptotic to the real line
otherwise.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from mbrh.broadening import BroadeningTransform

ZERO_BAND = 1e-12


def tau_xi(t: float, x: float) -> tuple[float, float]:
    tau = t - x
    xi = x / (4.0 * tau) if tau > 0 else np.inf
    return tau, xi


class PhaseField:
    """Phase data at a fixed point ``(t, x)``.

    Parameters
    ----------
    transform : BroadeningTransform
    t, x : float
    """

    def __init__(self, transform: BroadeningTransform, t: float, x: float):
        if t < 0 or x < 0:
            raise ValueError("t and x must be nonnegative")
        self.transform = transform
        self.t = float(t)
        self.x = float(x)
        self.tau, self.xi = tau_xi(self.t, self.x)
        self._level_cache: dict = {}

    # -- theta -----------------------------------------------------------------

    def theta(self, z, side: str | None = None) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.x == 0.0:
            return z * self.t
        return z * self.t - self.transform.eta(z, side) * self.x

    def theta_safe(self, z, upper: np.ndarray | None = None) -> np.ndarray:
        """``theta`` with real arguments on the support taken from the upper side
        unless ``upper`` marks them otherwise."""
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape, dtype=complex)
        on = (z.imag == 0) & self.transform.on_support(z.real)
        if self.x == 0.0:
            return z * self.t
        off = ~on
        out[off] = self.theta(z[off])
        if np.any(on):
            up = np.ones(z.shape, bool) if upper is None else np.broadcast_to(upper, z.shape)
            zp = z[on & up]
            zm = z[on & ~up]
            out[on & up] = self.theta(zp, "plus")
            out[on & ~up] = self.theta(zm, "minus")
        return out

    def re_i_theta(self, z) -> np.ndarray:
        """``Re(i theta)`` from the kernel moment; zero on the real line."""
        z = np.asarray(z, dtype=complex)
        nu = z.imag
        out = np.zeros(z.shape)
        mask = nu != 0
        if np.any(mask):
            Pi = self.transform.Pi(z.real[mask], nu[mask])
            out[mask] = nu[mask] * (self.x - self.t + 0.25 * self.x * Pi)
        return out

    def signature(self, z, band: float = ZERO_BAND) -> np.ndarray:
        v = self.re_i_theta(z)
        return np.where(np.abs(v) <= band, 0, np.sign(v)).astype(int)

    # -- stationary points ---------------------------------------------------

    def stationary_points(self, xi: float | None = None) -> tuple[float, float] | None:
        """Real roots ``lam_-(xi) < -Lambda``, ``lam_+(xi) > Lambda`` of ``1 = xi I1(lam, 0)``."""
        return stationary_points(self.transform, self.xi if xi is None else xi)

    def level_line(self, xi: float | None = None, resolution: int = 200):
        xi = self.xi if xi is None else xi
        key = (xi, resolution)
        if key not in self._level_cache:
            self._level_cache[key] = level_line(self.transform, xi, resolution)
        return self._level_cache[key]


def stationary_points(transform: BroadeningTransform, xi: float) -> tuple[float, float] | None:
    if not xi > 0:
        raise ValueError("xi must be positive")
    if not transform.profile.bounded:
        return None
    L = transform.Lambda

    def g(lam):
        I1, _ = transform.kernel_moment(np.array([lam]), np.array([0.0]), 2)
        return 1.0 - xi * I1[0]

    out = []
    for sgn in (1.0, -1.0):
        f = (lambda lam, s=sgn: g(s * lam))
        a = L * (1.0 + 1e-13)
        if f(a) >= 0:
            # the moment stays finite at the support end and never reaches 1/xi
            out.append(sgn * L)
            continue
        hi = L + max(np.sqrt(xi), L)
        while f(hi) < 0:
            hi = L + 2.0 * (hi - L)
        root = brentq(f, a, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        out.append(sgn * root)
    lam_plus, lam_minus = out
    return lam_minus, lam_plus


def level_line(transform: BroadeningTransform, xi: float, resolution: int = 200):
    """Sample the upper branch of ``Pi(lam, nu) = 1/xi`` and mirror it.

    Returns ``(lam, nu)`` arrays for the upper half-plane; the lower branch is
    ``(lam, -nu)``.  Bisection per ``lam`` uses that ``Pi`` decreases in
    ``|nu|``; the a priori bound ``|nu| <= sqrt(xi)`` brackets every root.
    """
    if not xi > 0:
        raise ValueError("xi must be positive")
    target = 1.0 / xi
    numax = np.sqrt(xi)
    if transform.profile.bounded:
        lam_m, lam_p = stationary_points(transform, xi)
        # cosine spacing resolves the vertical tangents at the real crossings
        th = np.linspace(np.pi, 0.0, resolution)
        lam = 0.5 * (lam_p + lam_m) + 0.5 * (lam_p - lam_m) * np.cos(th)
    else:
        span = 10.0 * max(1.0, np.sqrt(xi))
        lam = np.linspace(-span, span, resolution)
        lam_m = lam_p = None
    nu = np.zeros_like(lam)
    for i, l in enumerate(lam):
        if lam_m is not None and (l <= lam_m or l >= lam_p):
            continue
        f = (lambda v, l=l: float(transform.Pi(np.array([l]), np.array([v]))[0]) - target)
        hi = numax * (1.0 + 1e-12)
        if f(hi) > 0:
            raise RuntimeError(f"level line not bracketed at lambda={l}")
        lo = _lower_bracket(f, hi)
        if lo is None:
            nu[i] = 0.0
            continue
        nu[i] = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=300)
    return lam, nu


def _lower_bracket(f, hi):
    v = hi
    for _ in range(200):
        v *= 0.5
        if f(v) > 0:
            return v
        if v < 1e-300:
            break
    return None
