"""Inhomogeneous broadening weights and their Cauchy transform.

A profile ``n(lambda)`` is a nonnegative unit-mass weight.  The transform

    eta(z) = z + 1/4 * int n(s) / (s - z) ds

and its boundary values on the support drive the phase function.  The box
profile has closed forms; other profiles use Gauss-Legendre panels together
with a singularity-subtraction rule for principal values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from mbrh._cauchy import gauss_rule

log = logging.getLogger(__name__)

MASS_TOL = 1e-8
ENDPOINT_TOL = 1e-6


class ProfileError(ValueError):
    """Raised for profiles violating positivity, normalization or vanishing."""


def _smooth_panels(lo: float, hi: float, n_panels: int, p: int = 16, grade_ends: int = 0):
    """Composite Gauss-Legendre rule on ``[lo, hi]``; optional dyadic end grading."""
    edges = np.linspace(lo, hi, n_panels + 1)
    if grade_ends:
        h = edges[1] - edges[0]
        left = lo + h * 0.5 ** np.arange(grade_ends, 0, -1)
        right = hi - h * 0.5 ** np.arange(1, grade_ends + 1)
        edges = np.unique(np.concatenate([edges, left, right]))
    v, w = gauss_rule(p)
    c = 0.5 * (edges[1:] + edges[:-1])
    hw = 0.5 * (edges[1:] - edges[:-1])
    return (c[:, None] + hw[:, None] * v).ravel(), (hw[:, None] * w).ravel()


@dataclass(frozen=True)
class BroadeningProfile:
    """Nonnegative unit-mass weight ``n`` with support bound ``Lambda``.

    ``kind`` is one of ``box``, ``raised_cosine``, ``table``, ``callable``.
    ``Lambda`` may be ``inf`` for callables with unbounded support.  ``mu``
    is the declared Hölder/decay exponent; it is recorded, not verified.
    """

    kind: str
    Lambda: float
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    mu: float = 1.0
    scale: float = 1.0

    @property
    def bounded(self) -> bool:
        return np.isfinite(self.Lambda)

    def __call__(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        out = self.scale * np.asarray(self.func(lam), dtype=float)
        if self.bounded:
            out = np.where(np.abs(lam) < self.Lambda, out, 0.0)
        return out

    def quadrature(self, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights for integrals against ``n(lambda) d lambda``.

        Returned weights already include the profile, so that
        ``sum(w * f(nodes))`` approximates ``int n f``.
        """
        s, w = self.support_rule(n)
        return s, w * self(s)

    def support_rule(self, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
        """Plain rule on the support (or on the real line when unbounded)."""
        p = 16
        n_panels = max(1, int(np.ceil(n / p)))
        if self.bounded:
            return _smooth_panels(-self.Lambda, self.Lambda, n_panels, p)
        # algebraic map of the real line onto (-1, 1)
        u, wu = _smooth_panels(-1.0, 1.0, n_panels, p, grade_ends=6)
        L = self.scale_length
        s = L * u / (1.0 - u * u)
        ds = L * (1.0 + u * u) / (1.0 - u * u) ** 2
        return s, wu * ds

    @property
    def scale_length(self) -> float:
        return 1.0

    def mass(self, n: int = 256) -> float:
        s, w = self.quadrature(n)
        return float(np.sum(w))


def make_profile(spec: dict | str, normalize: bool = False) -> BroadeningProfile:
    """Build a profile from a config mapping.

    ``spec`` keys: ``type`` (box | raised_cosine | table | callable),
    ``lambda`` (support bound), ``samples`` (``[[lam, n], ...]`` for tables),
    ``func`` (for callables), ``mu`` (declared exponent).
    """
    if isinstance(spec, str):
        spec = {"type": spec, "lambda": 1.0}
    kind = str(spec.get("type", "box")).lower()
    Lam = float(spec.get("lambda", 1.0))
    mu = float(spec.get("mu", 1.0))
    if not Lam > 0:
        raise ProfileError(f"support bound must be positive, got {Lam}")
    if kind == "box":
        height = float(spec.get("height", 1.0 / (2.0 * Lam)))
        prof = BroadeningProfile("box", Lam, lambda lam: np.full(np.shape(lam), height), mu=1.0)
        # the box is the one profile allowed a jump at the support ends
        return _finish(prof, normalize, check_ends=False)
    if kind == "raised_cosine":
        amp = float(spec.get("height", 1.0))
        prof = BroadeningProfile(
            "raised_cosine", Lam,
            lambda lam: amp * (1.0 + np.cos(np.pi * lam / Lam)) / (2.0 * Lam), mu=1.0)
        return _finish(prof, normalize)
    if kind == "table":
        samples = np.asarray(spec.get("samples", []), dtype=float)
        if samples.ndim != 2 or samples.shape[1] != 2 or len(samples) < 2:
            raise ProfileError("table profile needs samples [[lambda, n], ...]")
        order = np.argsort(samples[:, 0])
        xs, ys = samples[order, 0], samples[order, 1]
        if np.any(ys < 0):
            raise ProfileError("table profile has negative samples")
        if "lambda" not in spec:
            Lam = float(max(abs(xs[0]), abs(xs[-1])))
        prof = BroadeningProfile(
            "table", Lam, lambda lam: np.interp(lam, xs, ys, left=0.0, right=0.0), mu=mu)
        return _finish(prof, normalize)
    if kind == "callable":
        func = spec["func"]
        Lam = float(spec.get("lambda", np.inf))
        prof = BroadeningProfile("callable", Lam, func, mu=mu)
        return _finish(prof, normalize, check_ends=np.isfinite(Lam))
    raise ProfileError(f"unknown broadening type {kind!r}")


def _finish(prof: BroadeningProfile, normalize: bool, check_ends: bool = True) -> BroadeningProfile:
    s, _ = prof.support_rule(512)
    vals = prof(s)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ProfileError("profile must be finite and nonnegative")
    peak = float(np.max(vals)) if vals.size else 0.0
    if peak <= 0:
        raise ProfileError("profile vanishes identically")
    if check_ends and prof.bounded:
        ends = np.abs(prof.func(np.array([-prof.Lambda, prof.Lambda])))
        if np.any(ends > ENDPOINT_TOL * peak):
            raise ProfileError("profile must vanish at the support ends")
    mass = prof.mass(512)
    if normalize:
        prof = BroadeningProfile(prof.kind, prof.Lambda, prof.func, prof.mu, prof.scale / mass)
    elif abs(mass - 1.0) > MASS_TOL:
        raise ProfileError(f"profile mass {mass:.12g} differs from 1")
    return prof


class BroadeningTransform:
    """Cauchy transform of a profile: ``eta``, its boundary values and moments.

    Parameters
    ----------
    profile : BroadeningProfile
    n_nodes : int
        Size of the Gauss rule used for non-box profiles.
    """

    def __init__(self, profile: BroadeningProfile, n_nodes: int = 256):
        self.profile = profile
        self.closed_form = profile.kind == "box"
        self._s, self._w = profile.support_rule(n_nodes)
        self._n = profile(self._s)

    @property
    def Lambda(self) -> float:
        return self.profile.Lambda

    # -- eta -----------------------------------------------------------------

    def cauchy(self, z) -> np.ndarray:
        """``int n(s)/(s - z) ds`` for ``z`` off the support."""
        z = np.asarray(z, dtype=complex)
        if self.closed_form:
            L = self.Lambda
            return self._box_height() * np.log((L - z) / (-L - z))
        lam = np.clip(z.real, self._s[0], self._s[-1])
        nl = self.profile(lam)
        flat = z.ravel()
        fl = nl.ravel()
        vals = np.empty(flat.shape, dtype=complex)
        for i0 in range(0, flat.size, 2048):
            zz = flat[i0:i0 + 2048, None]
            num = self._n[None, :] - fl[i0:i0 + 2048, None]
            vals[i0:i0 + 2048] = np.sum(self._w * num / (self._s[None, :] - zz), axis=1)
        vals = vals.reshape(z.shape) + nl * self._log_support(z)
        return vals

    def _log_support(self, z):
        if self.profile.bounded:
            L = self.Lambda
            return np.log((L - z) / (-L - z))
        # full line: principal value at infinity is symmetric
        return np.where(np.imag(z) > 0, 1j * np.pi, np.where(np.imag(z) < 0, -1j * np.pi, 0.0))

    def _box_height(self) -> float:
        return float(self.profile(np.array([0.0]))[0])

    def principal_value(self, lam) -> np.ndarray:
        """``p.v. int n(s)/(s - lam) ds`` for real ``lam``."""
        lam = np.asarray(lam, dtype=float)
        if self.closed_form:
            L = self.Lambda
            with np.errstate(divide="ignore"):
                return self._box_height() * np.log(np.abs((L - lam) / (L + lam)))
        nl = self.profile(lam)
        flat, fl = lam.ravel(), nl.ravel()
        vals = np.empty(flat.shape)
        for i0 in range(0, flat.size, 2048):
            d = self._s[None, :] - flat[i0:i0 + 2048, None]
            num = self._n[None, :] - fl[i0:i0 + 2048, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.where(d == 0, 0.0, num / d)
            vals[i0:i0 + 2048] = q @ self._w
        out = vals.reshape(lam.shape)
        if self.profile.bounded:
            L = self.Lambda
            with np.errstate(divide="ignore"):
                out = out + nl * np.log(np.abs((L - lam) / (L + lam)))
        return out

    def eta(self, z, side: str | None = None) -> np.ndarray:
        """``eta(z)``, or its boundary value ``eta_{+/-}`` for real ``z``.

        ``side='plus'`` is the limit from the upper half-plane.  Without a side,
        ``z`` must avoid the support.
        """
        z = np.asarray(z, dtype=complex)
        if side is None or side == "none":
            on = (z.imag == 0) & self.on_support(z.real)
            if np.any(on):
                raise ValueError("eta requested on the support without a side")
            return z + 0.25 * self.cauchy(z)
        sgn = _side_sign(side)
        if np.any(z.imag != 0):
            raise ValueError("sided eta requires real arguments")
        lam = z.real
        return lam + 0.25 * self.principal_value(lam) + sgn * 0.25j * np.pi * self.profile(lam)

    def on_support(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if not self.profile.bounded:
            return np.ones(lam.shape, dtype=bool)
        return np.abs(lam) <= self.Lambda

    # -- kernel moments --------------------------------------------------------

    def kernel_moment(self, lam, nu, power: int = 1):
        """``Pi`` (power 1) or the pair ``(I1, I2)`` (power 2).

        Pi(l, v) = int n / ((s-l)^2 + v^2)
        I1(l, v) = int n ((s-l)^2 - v^2) / ((s-l)^2 + v^2)^2
        I2(l, v) = int n (s-l) / ((s-l)^2 + v^2)^2
        """
        lam = np.asarray(lam, dtype=float)
        nu = np.abs(np.asarray(nu, dtype=float))
        lam, nu = np.broadcast_arrays(lam, nu)
        if power == 2 and np.any((nu == 0) & self.on_support(lam) & (self.profile(lam) > 0)):
            raise ValueError("second moment is not integrable on the support at nu=0")
        if self.closed_form:
            return self._box_moment(lam, nu, power)
        return self._quad_moment(lam, nu, power)

    def Pi(self, lam, nu):
        return self.kernel_moment(lam, nu, 1)

    def _box_moment(self, lam, nu, power):
        L = self.Lambda
        c = self._box_height()
        u1, u0 = L - lam, -L - lam
        if power == 1:
            with np.errstate(divide="ignore", invalid="ignore"):
                pos = c / nu * (np.arctan(u1 / nu) - np.arctan(u0 / nu))
                zero = c * (1.0 / (-u1) - 1.0 / (-u0))
            return np.where(nu > 0, pos, zero)
        d1 = u1 * u1 + nu * nu
        d0 = u0 * u0 + nu * nu
        I1 = c * (-u1 / d1 + u0 / d0)
        I2 = c * (-0.5 / d1 + 0.5 / d0)
        return I1, I2

    def _quad_moment(self, lam, nu, power):
        out1 = np.empty(lam.shape)
        out2 = np.empty(lam.shape)
        for idx in np.ndindex(lam.shape):
            s, w = _graded_rule(self._support_bounds(), lam[idx], nu[idx])
            n = self.profile(s)
            d = s - lam[idx]
            q = d * d + nu[idx] ** 2
            if power == 1:
                out1[idx] = np.sum(w * n / q)
            else:
                out1[idx] = np.sum(w * n * (d * d - nu[idx] ** 2) / q**2)
                out2[idx] = np.sum(w * n * d / q**2)
        return out1 if power == 1 else (out1, out2)

    def _support_bounds(self):
        if self.profile.bounded:
            return (-self.Lambda, self.Lambda)
        return (-np.inf, np.inf)

    def dtheta_moment(self, z) -> np.ndarray:
        """``int n(s)/(s - z)^2 ds`` (equals ``I1 + 2 i nu I2``)."""
        z = np.asarray(z, dtype=complex)
        I1, I2 = self.kernel_moment(z.real, z.imag, 2)
        return I1 + 2j * np.abs(z.imag) * I2 * np.sign(z.imag)


def _graded_rule(bounds, lam, nu, p: int = 16):
    """Composite rule refined geometrically around ``lam`` at scale ``nu``."""
    lo, hi = bounds
    scale = max(nu, 1e-3)
    if not np.isfinite(lo):
        lo, hi = lam - 1e3 * max(1.0, abs(lam)), lam + 1e3 * max(1.0, abs(lam))
    pts = [lo, hi]
    for k in range(-2, 30):
        d = scale * 2.0**k
        if d > hi - lo:
            break
        pts += [lam - d, lam + d]
    pts.append(lam)
    edges = np.unique(np.clip(pts, lo, hi))
    edges = edges[np.concatenate([[True], np.diff(edges) > 1e-14])]
    v, w = gauss_rule(p)
    c = 0.5 * (edges[1:] + edges[:-1])
    h = 0.5 * (edges[1:] - edges[:-1])
    return (c[:, None] + h[:, None] * v).ravel(), (h[:, None] * w).ravel()


def _side_sign(side) -> int:
    if side in ("plus", "+", "left", 1, +1):
        return 1
    if side in ("minus", "-", "right", -1):
        return -1
    raise ValueError(f"unknown side {side!r}")
