"""Physical fields from solved RH data, and residual diagnostics.

``E(t, x) = -4i m_12`` with ``m`` the ``1/z`` coefficient of ``M``, and the
density matrix

    F(t, x, lam) = -W sigma3 W^{-1},
    W = M_+(t, x, lam) exp(-i lam t sigma3) M_+(0, x, lam)^{-1},

where ``M_+(0, x, .)`` is the closed form of the region ``t <= x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mbrh.broadening import BroadeningTransform
from mbrh.phase import PhaseField
from mbrh.rhsolver import (DeltaFunction, RHError, SolverConfig, TrivialInstance,
                           build_instance)
from mbrh.spectral import ScatteringData

SIGMA3 = np.diag([1.0 + 0j, -1.0])
I2 = np.eye(2, dtype=complex)


def _comm(A, B):
    return A @ B - B @ A


def h_matrix(E) -> np.ndarray:
    """``H = (1/2) [[0, E], [-conj E, 0]]``."""
    E = np.asarray(E, dtype=complex)
    out = np.zeros(E.shape + (2, 2), dtype=complex)
    out[..., 0, 1] = 0.5 * E
    out[..., 1, 0] = -0.5 * np.conj(E)
    return out


def extract_field(instance) -> tuple[np.ndarray, complex]:
    """``(m, E)`` from a solved instance via the contour-integral formula."""
    if not getattr(instance, "solved", False):
        raise ValueError("instance not solved")
    m = instance.moment()
    return m, complex(-4j * m[0, 1])


def h_from_moment(m: np.ndarray) -> np.ndarray:
    """``H = -i [sigma3, m]``."""
    return -1j * _comm(SIGMA3, m)


def density_matrix(instance, scat: ScatteringData, transform: BroadeningTransform,
                   lam) -> np.ndarray:
    """``F(t, x, lam)`` for real ``lam`` (shape ``(n, 2, 2)``).

    Points at ``Re E`` (where the boundary values of ``M`` have a removable
    ambiguity) are filled by cubic interpolation from four neighbours.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    t, x = instance.t, instance.x
    if t == 0.0:
        # both M factors coincide and cancel identically
        return np.broadcast_to(-SIGMA3, lam.shape + (2, 2)).copy()
    reE = scat.E.real
    hit = np.abs(lam - reE) < 1e-9
    out = np.empty(lam.shape + (2, 2), dtype=complex)
    if np.any(~hit):
        out[~hit] = _density(instance, scat, transform, lam[~hit])
    if np.any(hit):
        hstep = 1e-3
        off = np.array([-2.0, -1.0, 1.0, 2.0]) * hstep
        Fn = _density(instance, scat, transform, reE + off)
        # Lagrange weights at 0 for nodes -2h, -h, h, 2h
        wts = np.array([-1.0, 4.0, 4.0, -1.0]) / 6.0
        out[hit] = np.einsum("k,kab->ab", wts, Fn)
    return out


def _density(instance, scat, transform, lam):
    t, x = instance.t, instance.x
    Mp = instance.evaluate_M(lam.astype(complex), 1.0)
    phase0 = PhaseField(transform, 0.0, x)
    q = scat.r(lam) * np.exp(-2j * phase0.theta_safe(lam.astype(complex)))
    e = np.exp(-1j * lam * t)
    # W = M_+(t) diag(e, 1/e) [[1, -q], [0, 1]]
    W = Mp.copy()
    W[:, :, 0] *= e[:, None]
    W[:, :, 1] /= e[:, None]
    W[:, :, 1] -= W[:, :, 0] * q[:, None]
    det = W[:, 0, 0] * W[:, 1, 1] - W[:, 0, 1] * W[:, 1, 0]
    Winv = np.empty_like(W)
    Winv[:, 0, 0], Winv[:, 1, 1] = W[:, 1, 1], W[:, 0, 0]
    Winv[:, 0, 1], Winv[:, 1, 0] = -W[:, 0, 1], -W[:, 1, 0]
    Winv /= det[:, None, None]
    return -(W * np.array([1.0, -1.0])[None, None, :]) @ Winv


def cauchy_of_F(s: np.ndarray, wn: np.ndarray, F: np.ndarray, z, side=None,
                F_at: np.ndarray | None = None, n_at=None,
                transform: BroadeningTransform | None = None) -> np.ndarray:
    """``G(z) = (1/4) int F(s) n(s) / (s - z) ds`` from a quadrature.

    ``s``, ``wn`` are nodes and weights already multiplied by ``n``.  For
    real ``z`` on the support pass ``side`` (+1/-1), ``F_at = F(z)`` and
    ``n_at = n(z)``; the principal value is computed by subtracting the
    value at ``z`` (log term from ``transform``).
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    F = np.asarray(F, dtype=complex)
    if side is None:
        K = wn[None, :] / (s[None, :] - z[:, None])
        return 0.25 * np.einsum("ms,sab->mab", K, F)
    if F_at is None or n_at is None or transform is None:
        raise ValueError("sided evaluation needs F_at, n_at and the transform")
    lam = z.real
    sgn = float(np.sign(side))
    n_s = transform.profile(s)
    base = np.where(n_s > 0, wn / np.where(n_s > 0, n_s, 1.0), 0.0)  # plain weights on support
    out = np.empty(z.shape + (2, 2), dtype=complex)
    for i, l in enumerate(lam):
        d = s - l
        fn = F * n_s[:, None, None] - F_at[i] * n_at[i]
        pv = np.einsum("s,sab->ab", base / d, fn)
        L = transform.Lambda
        pv = pv + F_at[i] * n_at[i] * np.log(abs((L - l) / (L + l)))
        out[i] = 0.25 * pv + sgn * 0.25j * np.pi * F_at[i] * n_at[i]
    return out


# -- field solutions ---------------------------------------------------------------------


@dataclass
class FieldSolution:
    """Fields on a list of ``(t, x)`` points.

    ``E`` has shape ``(P,)``; ``F`` has shape ``(P, L, 2, 2)`` on the
    ``lam`` grid (``None`` when densities were not requested).
    """

    t: np.ndarray
    x: np.ndarray
    E: np.ndarray
    lam: np.ndarray | None = None
    F: np.ndarray | None = None
    diagnostics: list = field(default_factory=list)

    @property
    def N(self):
        return None if self.F is None else self.F[..., 0, 0].real

    @property
    def rho(self):
        return None if self.F is None else self.F[..., 0, 1]

    def normalization_drift(self) -> float:
        if self.F is None:
            return float("nan")
        return float(np.max(np.abs(self.N**2 + np.abs(self.rho) ** 2 - 1.0)))


class RHFieldSolver:
    """Solves the RH problem at arbitrary ``(t, x)`` and reconstructs fields.

    Shares one ``delta`` function across points with equal lens anchors.
    """

    def __init__(self, scat: ScatteringData, transform: BroadeningTransform,
                 config: SolverConfig | None = None):
        self.scat = scat
        self.transform = transform
        self.config = config or SolverConfig()
        self._delta: DeltaFunction | None = None

    def instance(self, t: float, x: float):
        inst = build_instance(self.scat, self.transform, t, x, self.config, delta=self._delta)
        inst.solve() if isinstance(inst, TrivialInstance) else inst.solve(self.config.cond_limit)
        gen = getattr(inst, "generator", None)
        if gen is not None and getattr(gen, "delta", None) is not None:
            self._delta = gen.delta
        return inst

    def point(self, t: float, x: float, lam=None):
        inst = self.instance(t, x)
        _, E = extract_field(inst)
        F = None if lam is None else density_matrix(inst, self.scat, self.transform, lam)
        return E, F, inst.diagnostics.as_dict()

    def solve(self, t, x, lam=None, errors: str = "raise") -> FieldSolution:
        """Fields at every ``(t, x)``.  With ``errors='record'`` a failed
        point yields NaN values and an ``error`` entry in its diagnostics."""
        if errors not in ("raise", "record"):
            raise ValueError("errors must be 'raise' or 'record'")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t, x = np.broadcast_arrays(t, x)
        E = np.empty(t.shape, dtype=complex)
        F = None if lam is None else np.empty(t.shape + (np.size(lam), 2, 2), dtype=complex)
        diags = []
        for idx in np.ndindex(t.shape):
            try:
                e, f, d = self.point(float(t[idx]), float(x[idx]), lam)
            except RHError as exc:
                if errors == "raise":
                    raise
                e, f, d = complex(np.nan, np.nan), np.nan, dict(exc.diagnostics, error=str(exc))
            E[idx] = e
            if F is not None:
                F[idx] = f
            d.update({"t": float(t[idx]), "x": float(x[idx])})
            diags.append(d)
        return FieldSolution(t, x, E, None if lam is None else np.asarray(lam, float), F, diags)


# -- residuals ----------------------------------------------------------------------------


def mb_residuals(sample, t: float, x: float, h: float, s: np.ndarray, wn: np.ndarray) -> dict:
    """Residuals of the matrix MB equations at ``(t, x)`` by centered differences.

    ``sample(t, x) -> (E, F)`` with ``F`` of shape ``(len(s), 2, 2)`` on the
    quadrature nodes ``s`` (weights ``wn`` include ``n``).

    Returns max-norm residuals of
        H_t + H_x - (1/4) int [sigma3, F] n = 0,
        F_t + [i lam sigma3 + H, F] = 0.
    """
    if t - h < 0 or x - h < 0:
        raise ValueError("stencil leaves the domain")
    E0, F0 = sample(t, x)
    Etp, Ftp = sample(t + h, x)
    Etm, Ftm = sample(t - h, x)
    Exp, _ = sample(t, x + h)
    Exm, _ = sample(t, x - h)
    H = h_matrix
    Ht = (H(Etp) - H(Etm)) / (2 * h)
    Hx = (H(Exp) - H(Exm)) / (2 * h)
    integral = np.einsum("s,sab->ab", wn, _comm(SIGMA3[None], F0))
    r1 = Ht + Hx - 0.25 * integral
    Ft = (Ftp - Ftm) / (2 * h)
    A = 1j * s[:, None, None] * SIGMA3[None] + H(E0)[None]
    r2 = Ft + _comm(A, F0)
    return {"H_equation": float(np.max(np.abs(r1))), "F_equation": float(np.max(np.abs(r2)))}


def zero_curvature_residual(sample, t: float, x: float, h: float, s, wn, z) -> float:
    """``U_x - V_t + [U, V]`` at an off-support spectral point ``z``.

    ``U = -i z sigma3 - H``, ``V = i z sigma3 + H - i G(z)``.
    """
    def UV(tt, xx):
        E, F = sample(tt, xx)
        Hm = h_matrix(E)
        G = cauchy_of_F(s, wn, F, z)[0]
        U = -1j * z * SIGMA3 - Hm
        V = 1j * z * SIGMA3 + Hm - 1j * G
        return U, V

    U0, V0 = UV(t, x)
    Uxp, _ = UV(t, x + h)
    Uxm, _ = UV(t, x - h)
    _, Vtp = UV(t + h, x)
    _, Vtm = UV(t - h, x)
    res = (Uxp - Uxm) / (2 * h) - (Vtp - Vtm) / (2 * h) + _comm(U0, V0)
    return float(np.max(np.abs(res)))


def residual_suite(sample, t: float, x: float, hs, s, wn, z=None) -> dict:
    """MB residuals (and optionally the zero-curvature residual) for step sizes
    ``hs`` with the observed convergence orders between successive levels."""
    hs = [float(h) for h in hs]
    levels = []
    for h in hs:
        rec = {"h": h}
        rec.update(mb_residuals(sample, t, x, h, s, wn))
        if z is not None:
            rec["zero_curvature"] = zero_curvature_residual(sample, t, x, h, s, wn, z)
        levels.append(rec)
    orders = {}
    for key in ("H_equation", "F_equation", "zero_curvature"):
        if key not in levels[0]:
            continue
        vals = [lv[key] for lv in levels]
        orders[key] = [float(np.log(vals[i] / vals[i + 1]) / np.log(hs[i] / hs[i + 1]))
                       if vals[i + 1] > 0 and vals[i] > 0 else float("nan")
                       for i in range(len(vals) - 1)]
    return {"levels": levels, "orders": orders}
