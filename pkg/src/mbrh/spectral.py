"""Branch functions, spectral data and the plane-wave background.

The periodic boundary signal ``A0 exp(i omega0 t)`` fixes a single complex
endpoint ``E = -omega0/2 + i A0/2``.  All spectral functions are built from

    w(z) = sqrt((z - E)(z - conj E)),   w ~ z - Re E  at infinity,

with the cut on the vertical segment ``[E, conj E]`` (branch ``"segment"``),
or with the cut through infinity (branch ``"infinity"``), which is smooth and
positive on the real line.

Side conventions on the segment (oriented downward): ``left`` is the east
side ``Re z > Re E``, ``right`` the west side.  Sided evaluation is needed
only on the open segment; elsewhere the side is ignored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mbrh.broadening import BroadeningTransform


def _side_value(side) -> int:
    if side in (None, "none", 0):
        return 0
    if side in ("left", "plus", "+", 1):
        return 1
    if side in ("right", "minus", "-", -1):
        return -1
    raise ValueError(f"unknown side {side!r}")


@dataclass(frozen=True)
class PlaneWaveData:
    """Endpoint data of the periodic boundary signal.

    Attributes
    ----------
    A0, omega0 : float
        Boundary amplitude and frequency.
    E : complex
        Branch point ``-omega0/2 + i A0/2``.
    alpha0, beta0 : float
        Temporal and spatial frequencies of the background plane wave
        (``beta0`` is ``nan`` when no broadening transform was supplied).
    """

    A0: float
    omega0: float
    E: complex
    alpha0: float
    beta0: float

    @property
    def re(self) -> float:
        return self.E.real

    @property
    def im(self) -> float:
        return self.E.imag


def endpoint_from_boundary(A0: float, omega0: float,
                           transform: BroadeningTransform | None = None,
                           n_quad: int = 512) -> PlaneWaveData:
    """Endpoint ``E``, ``alpha0`` and (optionally) ``beta0`` for the signal."""
    A0 = float(A0)
    omega0 = float(omega0)
    if not (A0 > 0 and omega0 > 0):
        raise ValueError("boundary amplitude and frequency must be positive")
    E = complex(-0.5 * omega0, 0.5 * A0)
    beta0 = float("nan")
    if transform is not None:
        beta0 = compute_beta0(E, transform, n_quad)
    return PlaneWaveData(A0, omega0, E, 0.5 * omega0, beta0)


def compute_beta0(E: complex, transform: BroadeningTransform, n_quad: int = 512) -> float:
    s, w = transform.profile.quadrature(n_quad)
    return float(E.real + 0.25 * np.sum(w / w_branch(s, E, "infinity")).real)


def w_branch(z, E: complex, branch: str = "segment", side=None) -> np.ndarray:
    """``sqrt((z - E)(z - conj E))`` on the requested branch."""
    z = np.asarray(z, dtype=complex)
    zeta = z - E.real
    b = E.imag
    if branch == "infinity":
        return np.sqrt(zeta * zeta + b * b)
    if branch != "segment":
        raise ValueError(f"unknown branch {branch!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = zeta * np.sqrt(1.0 + (b / zeta) ** 2)
    sd = _side_value(side)
    on_cut = (zeta.real == 0) & (np.abs(zeta.imag) < b)
    if np.any(on_cut):
        if sd == 0:
            raise ValueError("w evaluated on the cut without a side")
        out = np.where(on_cut, sd * np.sqrt(np.maximum(b * b - zeta.imag**2, 0.0)), out)
    return out


class ScatteringData:
    """Spectral functions ``w, kappa, a, b, r, h`` for a plane-wave endpoint.

    Parameters
    ----------
    data : PlaneWaveData
    """

    def __init__(self, data: PlaneWaveData):
        self.data = data
        self.E = data.E

    # -- branch functions --------------------------------------------------------

    def w(self, z, side=None, branch: str = "segment") -> np.ndarray:
        return w_branch(z, self.E, branch, side)

    def kappa(self, z, side=None) -> np.ndarray:
        """Fourth root of ``(z - conj E)/(z - E)`` tending to 1 at infinity."""
        z = np.asarray(z, dtype=complex)
        zeta = z - self.E.real
        b = self.E.imag
        sd = _side_value(side)
        on_cut = (zeta.real == 0) & (np.abs(zeta.imag) < b)
        if np.any(on_cut) and sd == 0:
            raise ValueError("kappa evaluated on the cut without a side")
        with np.errstate(divide="ignore", invalid="ignore"):
            q = (zeta + 1j * b) / (zeta - 1j * b)
        # on the cut q is negative real; the east limit has arg +pi
        mod = np.abs(q) ** 0.25
        ang = np.angle(q)
        ang = np.where(on_cut, np.pi * sd, ang)
        return mod * np.exp(0.25j * ang)

    def a(self, z, side=None):
        k = self.kappa(z, side)
        return 0.5 * (k + 1.0 / k)

    def b(self, z, side=None):
        k = self.kappa(z, side)
        return 0.5 * (k - 1.0 / k)

    def r(self, z, side=None) -> np.ndarray:
        """Reflection coefficient ``i (w - z + Re E) / Im E`` (no a/b quotient)."""
        z = np.asarray(z, dtype=complex)
        return 1j * (self.w(z, side) - z + self.E.real) / self.E.imag

    def h(self, z) -> np.ndarray:
        """Jump ``r_right - r_left`` on the open segment ``(E, conj E)``."""
        z = np.asarray(z, dtype=complex)
        nu = z.imag
        on = np.isclose(z.real, self.E.real, atol=1e-12 * max(1.0, abs(self.E))) & (
            np.abs(nu) <= self.E.imag)
        if not np.all(on):
            raise ValueError("h is defined only on the segment [E, conj E]")
        b = self.E.imag
        return -2j * np.sqrt(np.maximum(b * b - nu * nu, 0.0)) / b

    def transition_matrix(self, lam) -> np.ndarray:
        """``[[a, b], [b, a]]`` on the real line."""
        a = self.a(lam)
        b = self.b(lam)
        return np.stack([np.stack([a, b], -1), np.stack([b, a], -1)], -2)


def background_fields(data: PlaneWaveData, t, x, lam):
    """Plane-wave solution ``(E_bg, rho_bg, N_bg)`` with the smooth real-line branch."""
    if not np.isfinite(data.beta0):
        raise ValueError("beta0 missing: build PlaneWaveData with a broadening transform")
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    b = data.im
    phase = np.exp(2j * (data.alpha0 * t + data.beta0 * x))
    w = w_branch(lam, data.E, "infinity").real
    E_bg = 2.0 * b * phase
    rho = 1j * b / w * phase
    N = -(lam - data.re) / w
    return E_bg, rho, N
