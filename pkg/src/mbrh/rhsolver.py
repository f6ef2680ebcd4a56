"""Jump matrices, contour deformation and the discrete singular integral equation.

Conventions: ``M_- = M_+ J`` on every oriented piece, ``+`` on the left.  The
solver works with ``u = M_+ (I - J)``, which satisfies

    u - C_+[u] (I - J) = I - J,      M(z) = I + C[u](z),

with ``C`` the Cauchy integral ``(1/2 pi i) int u(s)/(s - z) ds``.  Rows of
``u`` decouple, so both rows share one linear system with two right-hand
sides.  Components of ``u`` that vanish identically (triangular jumps) are
dropped from the unknowns.

Regions:

* ``t <= x``  closed form (no jump survives after the triangular gauge),
* ``t > x``, bounded support: scalar ``delta`` gauge plus lenses opened from
  ``lambda1`` and ``lambda2`` along straight rays,
* ``t > x``, unbounded support: the undeformed real-line problem with
  panels that resolve the oscillation (``mode="deformed"`` still builds
  lenses along the level line, which only reach moderate accuracy).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack
from scipy.special import erfc

from mbrh._cauchy import PanelSet, gauss_rule
from mbrh.broadening import BroadeningTransform
from mbrh.contour import (Contour, Discretization, build_deformed_contour, build_sigma,
                          discretize)
from mbrh.phase import PhaseField
from mbrh.spectral import ScatteringData

log = logging.getLogger(__name__)

COND_LIMIT = 1e12
I2 = np.eye(2, dtype=complex)
UPPER_LENS = ("lens_right_up", "lens_left_up")
LOWER_LENS = ("lens_right_down", "lens_left_down")


class RHError(RuntimeError):
    """Numerical failure of a solve; ``diagnostics`` carries what is known."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def _mat(a, b, c, d) -> np.ndarray:
    a, b, c, d = np.broadcast_arrays(*(np.asarray(v, dtype=complex) for v in (a, b, c, d)))
    out = np.empty(a.shape + (2, 2), dtype=complex)
    out[..., 0, 0], out[..., 0, 1], out[..., 1, 0], out[..., 1, 1] = a, b, c, d
    return out


def lens_anchors(Lambda: float, E: complex, xi: float) -> tuple[float, float]:
    """Default ``(lambda1, lambda2)``: clear of the support and the stationary points."""
    xi = 0.0 if not np.isfinite(xi) else xi
    lam2 = max(Lambda, abs(E)) + 2.0 * max(2.0, math.sqrt(xi))
    return -lam2, lam2


# -- scalar delta function ------------------------------------------------------------


def taper(s, lambda1: float, lambda2: float, width: float) -> np.ndarray:
    """Smooth switch: 1 beyond ``[lambda1, lambda2]``, 0 well inside.

    An error-function ramp of total width ``width`` ending at the anchors,
    below ``1e-17`` of its height at the inner end.  ``width = 0`` is the
    sharp indicator of ``(-inf, lambda1] U [lambda2, inf)``.
    """
    s = np.asarray(s, dtype=float)
    if width <= 0:
        return ((s >= lambda2) | (s <= lambda1)).astype(float)
    sig = width / 12.0
    right = 0.5 * erfc((lambda2 - 0.5 * width - s) / sig)
    left = 0.5 * erfc((s - lambda1 - 0.5 * width) / sig)
    return left + right


class DeltaFunction:
    """``delta(z) = exp(C[log(1 - r^2) chi](z))`` on the outer real rays.

    ``chi`` is :func:`taper`.  With ``width = 0`` this is the exact solution
    of ``delta_+ = delta_- (1 - r^2)`` on ``(-inf, lambda1] U [lambda2, inf)``,
    ``delta(inf) = 1``; a positive width smooths the endpoint behaviour and
    moves the ramp into ``(lambda1, lambda2)``, where the jump is kept on the
    contour.

    Parameters
    ----------
    scat : ScatteringData
    lambda1, lambda2 : float
    width : float
        Ramp width (0 for the exact, endpoint-singular version).
    radius : float
        Truncation of the rays; ``log(1 - r^2) = O(s^-2)``.
    """

    def __init__(self, scat: ScatteringData, lambda1: float, lambda2: float,
                 width: float = 2.0, radius: float = 1e7, p: int = 16):
        if not lambda1 < lambda2:
            raise ValueError("lambda1 must be smaller than lambda2")
        self.scat = scat
        self.lambda1 = float(lambda1)
        self.lambda2 = float(lambda2)
        self.width = float(width)
        self.radius = float(radius)
        right = self._edges(self.lambda2)
        left = -right[::-1] + (self.lambda1 + self.lambda2)
        # left copy mirrors the right one about the midpoint
        a = np.concatenate([left[:-1], right[:-1]])
        b = np.concatenate([left[1:], right[1:]])
        self.panels = PanelSet(a, b, p)
        s = self.panels.nodes.real
        r = scat.r(s)
        self.g = np.log((1.0 - r * r).real) * taper(s, self.lambda1, self.lambda2, self.width)

    def _edges(self, anchor: float) -> np.ndarray:
        w = self.width
        if w > 0:
            n_ramp = max(4, int(math.ceil(w / (w / 12.0 * 3.0))))
            inner = np.linspace(anchor - w, anchor, n_ramp + 1)
        else:
            inner = anchor + 0.5 * 0.2 ** np.arange(16, 0, -1)
            inner = np.concatenate([[anchor], inner])
        outer = anchor + 0.5 * (1.5 ** np.arange(0, 80) - 1.0) / 0.5
        outer = outer[outer < anchor + self.radius]
        edges = np.unique(np.concatenate([inner, outer, [anchor + self.radius]]))
        return edges

    def log(self, z, side=None) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        panel, local, sd = None, None, None
        if side is not None:
            panel, local = self.panels.locate(z)
            sd = np.broadcast_to(np.asarray(side, dtype=float), z.shape)
        K = self.panels.matrix(z, panel, local, sd)
        return (K @ self.g) / (2j * np.pi)

    def __call__(self, z, side=None) -> np.ndarray:
        return np.exp(self.log(z, side))


def delta_scalar(scat: ScatteringData, lambda1: float, lambda2: float, z, side=None,
                 width: float = 0.0) -> np.ndarray:
    """One-shot evaluation of :class:`DeltaFunction` (exact version by default)."""
    return DeltaFunction(scat, lambda1, lambda2, width)(z, side)


# -- jump matrices ------------------------------------------------------------------


class JumpGenerator:
    """Jump matrices at a fixed ``(t, x)``.

    ``variant`` is ``original`` (the undeformed problem), ``finite`` (lenses
    from ``lambda1``/``lambda2`` with the ``delta`` gauge) or ``infinite``
    (lenses along the level line).
    """

    VARIANTS = ("original", "finite", "infinite")

    def __init__(self, scat: ScatteringData, transform: BroadeningTransform, t: float, x: float,
                 variant: str = "original", delta: DeltaFunction | None = None):
        if variant not in self.VARIANTS:
            raise ValueError(f"unknown jump variant {variant!r}")
        if variant == "finite" and delta is None:
            raise ValueError("the finite variant needs a delta function")
        self.scat = scat
        self.transform = transform
        self.phase = PhaseField(transform, t, x)
        self.t, self.x = float(t), float(x)
        self.variant = variant
        self.delta = delta

    # phase helpers
    def theta(self, z, side=None):
        return self.phase.theta(z, side)

    def real_jump(self, lam) -> np.ndarray:
        """Undeformed jump on the real line."""
        lam = np.asarray(lam, dtype=float)
        th_p = self.phase.theta(lam.astype(complex), "plus")
        th_m = self.phase.theta(lam.astype(complex), "minus")
        r = self.scat.r(lam)
        return _mat(1.0 - r * r * np.exp(2j * (th_m - th_p)), -r * np.exp(-2j * th_p),
                    r * np.exp(2j * th_m), 1.0)

    def segment_jump(self, z, upper: bool) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        h = self.scat.h(z)
        th = self.theta(z)
        if upper:
            return _mat(1.0, h * np.exp(-2j * th), 0.0, 1.0)
        return _mat(1.0, 0.0, h * np.exp(2j * th), 1.0)

    def lens_factor(self, z, upper: bool, side=None) -> np.ndarray:
        """Triangular factor carried by a lens (finite variant).

        ``side`` picks the boundary value of ``delta`` for real ``z``.
        """
        z = np.asarray(z, dtype=complex)
        r = self.scat.r(z)
        th = self.theta(z)
        d2 = self.delta(z, side) ** 2
        if upper:
            return _mat(1.0, 0.0, r * d2 * np.exp(2j * th) / (1.0 - r * r), 1.0)
        return _mat(1.0, -r / d2 * np.exp(-2j * th) / (1.0 - r * r), 0.0, 1.0)

    def jump(self, z, role: str, side=None) -> np.ndarray:
        """Jump matrices at points ``z`` of pieces with the given role."""
        z = np.asarray(z, dtype=complex)
        v = self.variant
        if role == "identity":
            return np.broadcast_to(I2, z.shape + (2, 2)).copy()
        if v == "infinite":
            if role not in ("lens_upper", "lens_lower"):
                raise ValueError(f"role {role!r} not part of the infinite-support contour")
            r = self.scat.r(z)
            th = self.theta(z)
            if role == "lens_upper":
                return _mat(1.0, -r * np.exp(-2j * th), 0.0, 1.0)
            return _mat(1.0, 0.0, r * np.exp(2j * th), 1.0)
        if role == "real":
            J = self.real_jump(z.real)
            if v == "original":
                return J
            dp = self.delta(z, 1.0)
            dm = self.delta(z, -1.0)
            return _mat(J[..., 0, 0] * dm / dp, J[..., 0, 1] / (dp * dm),
                        J[..., 1, 0] * dp * dm, J[..., 1, 1] * dp / dm)
        if role in ("upper_segment", "lower_segment"):
            upper = role == "upper_segment"
            J = self.segment_jump(z, upper)
            if v == "finite":
                d2 = self.delta(z) ** 2
                if upper:
                    J[..., 0, 1] /= d2
                else:
                    J[..., 1, 0] *= d2
            return J
        if v == "finite" and role in UPPER_LENS + LOWER_LENS:
            return self.lens_factor(z, role in UPPER_LENS)
        raise ValueError(f"role {role!r} not valid for variant {v!r}")

    def matrices(self, disc: Discretization) -> np.ndarray:
        z = disc.nodes
        roles = disc.node_role
        out = np.empty(z.shape + (2, 2), dtype=complex)
        for role in np.unique(roles):
            sel = roles == role
            out[sel] = self.jump(z[sel], str(role))
        return out


def solve_trivial_region(scat: ScatteringData, transform: BroadeningTransform, t: float,
                         x: float, z, side=None) -> np.ndarray:
    """Closed-form ``M`` for ``t <= x``: upper unipotent above the real line, lower below.

    ``side`` (+1/-1) selects the boundary value for real ``z``.
    """
    if t > x:
        raise ValueError("the closed form holds only for t <= x")
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    phase = PhaseField(transform, t, x)
    sd = np.zeros(z.shape) if side is None else np.broadcast_to(np.asarray(side, float), z.shape)
    upper = (z.imag > 0) | ((z.imag == 0) & (sd > 0))
    lower = (z.imag < 0) | ((z.imag == 0) & (sd < 0))
    if np.any(~(upper | lower)):
        raise ValueError("real arguments need a side")
    out = np.empty(z.shape + (2, 2), dtype=complex)
    out[:] = I2
    # r is continuous across the real line away from Re E
    if np.any(upper):
        zu = z[upper]
        th = phase.theta_safe(zu, np.ones(zu.shape, bool))
        out[upper, 0, 1] = scat.r(zu) * np.exp(-2j * th)
    if np.any(lower):
        zl = z[lower]
        th = phase.theta_safe(zl, np.zeros(zl.shape, bool))
        out[lower, 1, 0] = scat.r(zl) * np.exp(2j * th)
    return out


# -- the linear system ------------------------------------------------------------------


@dataclass
class SolveDiagnostics:
    n_nodes: int = 0
    n_unknowns: int = 0
    condition: float = float("nan")
    residual: float = float("nan")
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {"n_nodes": self.n_nodes, "n_unknowns": self.n_unknowns,
             "condition": self.condition, "residual": self.residual, "seconds": self.seconds}
        d.update(self.extra)
        return d


class RHInstance:
    """A discretized RH problem and, after :meth:`solve`, its solution.

    Parameters
    ----------
    disc : Discretization
    generator : object with ``matrices(disc) -> (N, 2, 2)``
    undo : callable ``(z, M, side) -> M`` mapping the solved (deformed)
        function back to the original one; identity by default.
    """

    def __init__(self, disc: Discretization, generator, undo=None, t: float = float("nan"),
                 x: float = float("nan")):
        self.disc = disc
        self.contour: Contour = disc.contour
        self.generator = generator
        self.undo = undo
        self.t, self.x = t, x
        self.u: np.ndarray | None = None
        self.W: np.ndarray | None = None
        self.J: np.ndarray | None = None
        self.diagnostics = SolveDiagnostics(n_nodes=disc.size)
        self.tail = None  # optional ``m -> 2x2`` correction for truncated rays

    @property
    def solved(self) -> bool:
        return self.u is not None

    # -- assembly and solve ---------------------------------------------------------

    def cauchy_plus_matrix(self) -> np.ndarray:
        """``C_+`` at the nodes as a dense matrix acting on node values."""
        P = self.disc.panels
        panel = np.repeat(np.arange(P.n_panels), P.p)
        local = np.tile(P.v, P.n_panels)
        return P.matrix(P.nodes, panel, local, 1.0) / (2j * np.pi)

    def solve(self, cond_limit: float = COND_LIMIT) -> "RHInstance":
        t0 = time.perf_counter()
        N = self.disc.size
        J = self.generator.matrices(self.disc)
        if not np.all(np.isfinite(J)):
            raise RHError("non-finite jump matrix", self.diagnostics.as_dict())
        D = I2 - J
        self.J = J
        m1 = np.nonzero(np.any(D[:, :, 0] != 0, axis=1))[0]
        m2 = np.nonzero(np.any(D[:, :, 1] != 0, axis=1))[0]
        n1, n2 = m1.size, m2.size
        u = np.zeros((N, 2, 2), dtype=complex)
        self.diagnostics.n_unknowns = n1 + n2
        if n1 + n2 == 0:
            self.diagnostics.condition = 1.0
            self.diagnostics.residual = 0.0
        else:
            A = self.cauchy_plus_matrix()
            S = np.empty((n1 + n2, n1 + n2), dtype=complex)
            S[:n1, :n1] = -D[m1, 0, 0][:, None] * A[np.ix_(m1, m1)]
            S[:n1, n1:] = -D[m1, 1, 0][:, None] * A[np.ix_(m1, m2)]
            S[n1:, :n1] = -D[m2, 0, 1][:, None] * A[np.ix_(m2, m1)]
            S[n1:, n1:] = -D[m2, 1, 1][:, None] * A[np.ix_(m2, m2)]
            S[np.diag_indices(n1 + n2)] += 1.0
            rhs = np.empty((n1 + n2, 2), dtype=complex)
            rhs[:n1] = D[m1, :, 0]
            rhs[n1:] = D[m2, :, 1]
            anorm = np.linalg.norm(S, 1)
            lu, piv = sla.lu_factor(S, check_finite=False)
            rcond, info = lapack.zgecon(lu, anorm, norm="1")
            cond = 1.0 / rcond if rcond > 0 else float("inf")
            self.diagnostics.condition = cond
            if not cond < cond_limit:
                self.diagnostics.seconds = time.perf_counter() - t0
                raise RHError(f"ill-conditioned system (condition estimate {cond:.3e})",
                              self.diagnostics.as_dict())
            sol = sla.lu_solve((lu, piv), rhs, check_finite=False)
            res = np.linalg.norm(S @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
            self.diagnostics.residual = float(res)
            u[m1, :, 0] = sol[:n1]
            u[m2, :, 1] = sol[n1:]
            self.W = np.einsum("ij,jab->iab", A, u)
        if self.W is None:
            self.W = np.zeros_like(u)
        self.u = u
        self.diagnostics.seconds = time.perf_counter() - t0
        return self

    def _require(self):
        if not self.solved:
            raise RHError("instance not solved")

    # -- evaluation ---------------------------------------------------------------------

    def cauchy(self, z, side=None) -> np.ndarray:
        """``C[u](z)``; with ``side`` points on the contour give the ``+``/``-`` limits."""
        self._require()
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        P = self.disc.panels
        panel = local = sd = None
        if side is not None:
            panel, local = P.locate(z)
            sd = np.broadcast_to(np.asarray(side, dtype=float), z.shape)
        K = P.matrix(z, panel, local, sd)
        out = K @ self.u.reshape(-1, 4) / (2j * np.pi)
        return out.reshape(z.shape + (2, 2))

    def solved_M(self, z, side=None) -> np.ndarray:
        """The function the discrete problem was posed for (deformed if applicable)."""
        return I2 + self.cauchy(z, side)

    def evaluate_M(self, z, side=None) -> np.ndarray:
        """The original ``M`` at ``z`` (deformations undone)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        M = self.solved_M(z, side)
        if self.undo is not None:
            M = self.undo(z, M, side)
        return M

    def moment(self) -> np.ndarray:
        """``m = lim z (M - I)`` from the contour integral ``-(1/2 pi i) int u``."""
        self._require()
        m = -np.einsum("i,iab->ab", self.disc.weights, self.u) / (2j * np.pi)
        return m if self.tail is None else m + self.tail(m)

    def field(self) -> complex:
        return complex(-4j * self.moment()[0, 1])

    def jump_residual(self, z=None, panel=None) -> float:
        """``max |M_- - M_+ J|`` at held-out contour points (solved problem)."""
        self._require()
        if z is None:
            z, panel = self.disc.held_out(per_panel=2, margin=1e-6)
        z = np.asarray(z, dtype=complex)
        Mp = self.solved_M(z, 1.0)
        Mm = self.solved_M(z, -1.0)
        roles = np.array(self.contour.roles())[self.disc.panel_piece[panel]]
        J = np.empty(z.shape + (2, 2), dtype=complex)
        for role in np.unique(roles):
            sel = roles == role
            J[sel] = self.generator.jump(z[sel], str(role))
        return float(np.max(np.abs(Mm - Mp @ J)))


class TrivialInstance:
    """Closed-form solution in the region ``t <= x``."""

    def __init__(self, scat: ScatteringData, transform: BroadeningTransform, t: float, x: float):
        if t > x:
            raise ValueError("trivial instance requires t <= x")
        self.scat, self.transform, self.t, self.x = scat, transform, float(t), float(x)
        self.diagnostics = SolveDiagnostics(extra={"mode": "trivial"})
        self.solved = True

    def solve(self, *args, **kwargs):
        return self

    def evaluate_M(self, z, side=None):
        return solve_trivial_region(self.scat, self.transform, self.t, self.x, z, side)

    def moment(self):
        return np.zeros((2, 2), dtype=complex)

    def field(self) -> complex:
        return 0j


# -- constructors ----------------------------------------------------------------------


@dataclass
class SolverConfig:
    """Discretization controls shared by all solves."""

    nodes_per_piece: int = 128
    clustering: float = 0.15
    floor: float = 1e-8
    angle: float = math.pi / 4
    taper_width: float = 2.0
    decay_target: float = 40.0
    max_lens_radius: float = 1e4
    min_lens_radius: float = 20.0
    sigma_radius: float = 1e7
    sigma_tail_tol: float = 1e-5
    sigma_phase_per_panel: float = 10.0
    max_growth: float = 2.0
    max_panel_length: float = 1.0
    cond_limit: float = COND_LIMIT
    p: int = 16


def _breakpoints(transform: BroadeningTransform, x: float) -> list[float]:
    if x > 0 and transform.profile.bounded:
        L = transform.Lambda
        return [-L, L]
    return []


def sigma_instance(scat: ScatteringData, transform: BroadeningTransform, t: float, x: float,
                   config: SolverConfig | None = None) -> RHInstance:
    """The undeformed problem on ``R U (E, conj E)``.

    Production path for unbounded support at ``t > x``; otherwise a validation
    reference.
    """
    cfg = config or SolverConfig()
    contour = build_sigma(scat.E, _breakpoints(transform, x))
    R, hmax = cfg.sigma_radius, None
    omega = 2.0 * abs(x - t)
    if omega > 0:
        # off-diagonal jumps ~ r exp(i omega lam) with r = O(1/lam): resolve the
        # oscillation and cut where the neglected tail is ~ 1/(omega R^2)
        hmax = cfg.sigma_phase_per_panel / omega
        R = min(R, math.sqrt(1.0 / (omega * cfg.sigma_tail_tol)))
    disc = discretize(contour, cfg.nodes_per_piece, R, cfg.clustering, cfg.floor,
                      cfg.p, max_growth=cfg.max_growth, max_ray_panel=hmax)
    gen = JumpGenerator(scat, transform, t, x, "original")
    inst = RHInstance(disc, gen, None, t, x)
    if omega > 0:
        ends = [p.start.real for p in contour.pieces if p.kind == "ray"]
        Rt = disc.truncation_radius
        inst.tail = _RealTail(gen, min(ends) - Rt, max(ends) + Rt, 2.0 * (t - x))
    inst.diagnostics.extra["mode"] = "sigma"
    return inst


class _RealTail:
    """Moment contribution of the real line beyond the truncated rays.

    Off-diagonal tails ``int r exp(-+2i theta)`` are oscillatory with decay
    ``O(1/lam)``; each is rotated onto a vertical ray where the exponential
    decays at rate ``omega`` and summed by Gauss-Laguerre.  ``M_+`` is
    replaced by its first-order expansion ``I + m / z``.
    """

    def __init__(self, gen: JumpGenerator, left: float, right: float, omega: float,
                 n: int = 48):
        self.gen, self.left, self.right = gen, float(left), float(right)
        u, w = np.polynomial.laguerre.laggauss(n)
        # the integrand carries its own exponential decay: use w e^u
        self.s, self.w = u / abs(omega), w * np.exp(u) / abs(omega)
        self.sign = 1.0 if omega > 0 else -1.0

    def _f(self, z):
        r = self.gen.scat.r(z)
        th = self.gen.theta(z)
        return r * np.exp(-2j * th), -r * np.exp(2j * th)

    def _integral(self, entry: int, d: complex, m_diag: complex) -> complex:
        total = 0j
        for anchor, orient in ((self.right, 1.0), (self.left, -1.0)):
            z = anchor + d * self.s
            f = self._f(z)[entry] * (1.0 + m_diag / z)
            total += orient * d * np.sum(self.w * f)
        return total

    def __call__(self, m: np.ndarray) -> np.ndarray:
        d12 = -1j * self.sign  # e^{-2i theta} decays below the axis when t > x
        out = np.zeros((2, 2), dtype=complex)
        out[0, 1] = self._integral(0, d12, m[0, 0])
        out[1, 0] = self._integral(1, -d12, m[1, 1])
        return -out / (2j * np.pi)


class _FiniteUndo:
    """``M = M2 G^{-1} delta^{-sigma3}`` with ``G`` the lens factor inside the lens sectors."""

    def __init__(self, gen: JumpGenerator, lambda1: float, lambda2: float, angle: float):
        self.gen, self.l1, self.l2, self.angle = gen, lambda1, lambda2, angle

    def sectors(self, z, side=None) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        sd = np.zeros(z.shape) if side is None else np.broadcast_to(np.asarray(side, float), z.shape)
        im = np.where(z.imag == 0, sd, z.imag)
        a_r = np.abs(np.angle(z - self.l2))
        a_l = np.abs(np.angle(self.l1 - z))
        inside = ((z.real > self.l2) & (a_r < self.angle)) | ((z.real < self.l1) & (a_l < self.angle))
        inside |= (z.imag == 0) & ((z.real > self.l2) | (z.real < self.l1))
        return inside & (im > 0), inside & (im < 0)

    def __call__(self, z, M, side=None):
        up, lo = self.sectors(z, side)
        out = M.copy()
        if np.any(up):
            G = self.gen.lens_factor(z[up], True, 1.0)
            G[..., 1, 0] *= -1.0  # inverse of a unipotent factor
            out[up] = out[up] @ G
        if np.any(lo):
            G = self.gen.lens_factor(z[lo], False, -1.0)
            out[lo] = out[lo] @ G
        d = self.gen.delta(z, side)
        out[..., :, 0] /= d[..., None]
        out[..., :, 1] *= d[..., None]
        return out


class _InfiniteUndo:
    """``M = M2 G^{-1}`` between the lenses and the real line."""

    def __init__(self, gen: JumpGenerator, lam: np.ndarray, height: np.ndarray):
        self.gen, self.lam, self.height = gen, lam, height

    def __call__(self, z, M, side=None):
        z = np.asarray(z, dtype=complex)
        sd = np.zeros(z.shape) if side is None else np.broadcast_to(np.asarray(side, float), z.shape)
        hgt = np.interp(z.real, self.lam, self.height)
        im = np.where(z.imag == 0, sd, z.imag)
        up = (im > 0) & (z.imag < hgt)
        lo = (im < 0) & (-z.imag < hgt)
        out = M.copy()
        scat, ph = self.gen.scat, self.gen.phase
        if np.any(up):
            zu = z[up]
            th = ph.theta_safe(zu, np.ones(zu.shape, bool))
            c = scat.r(zu) * np.exp(-2j * th)
            out[up, :, 1] += out[up, :, 0] * c[:, None]
        if np.any(lo):
            zl = z[lo]
            th = ph.theta_safe(zl, np.zeros(zl.shape, bool))
            c = scat.r(zl) * np.exp(2j * th)
            out[lo, :, 0] += out[lo, :, 1] * c[:, None]
        return out


def lens_radius(tau: float, cfg: SolverConfig) -> float:
    """Ray length beyond which the lens jumps are below ``exp(-decay_target)``."""
    s = cfg.decay_target / (2.0 * math.sin(cfg.angle) * max(tau, 1e-12))
    return float(min(cfg.max_lens_radius, max(cfg.min_lens_radius, s)))


def deformed_instance(scat: ScatteringData, transform: BroadeningTransform, t: float, x: float,
                      config: SolverConfig | None = None,
                      delta: DeltaFunction | None = None) -> RHInstance:
    """Lens-opened problem for ``t > x``."""
    cfg = config or SolverConfig()
    if not t > x:
        raise ValueError("the deformed problem is set up for t > x")
    phase = PhaseField(transform, t, x)
    if transform.profile.bounded:
        l1, l2 = lens_anchors(transform.Lambda, scat.E, phase.xi)
        if delta is None or (delta.lambda1, delta.lambda2, delta.width) != (l1, l2, cfg.taper_width):
            delta = DeltaFunction(scat, l1, l2, cfg.taper_width)
        # split the real piece so panels resolve the ramp of the delta gauge
        ramp = []
        if cfg.taper_width > 0:
            steps = l2 - cfg.taper_width * np.arange(0, 5) / 4.0
            ramp = list(steps[1:]) + list(-steps[1:] + (l1 + l2))
        contour = build_deformed_contour("finite", scat.E, l1, l2, shape={"angle": cfg.angle},
                                         Lambda=transform.Lambda,
                                         breakpoints=_breakpoints(transform, x), junctions=ramp)
        R = lens_radius(phase.tau, cfg)
        disc = discretize(contour, cfg.nodes_per_piece, R, cfg.clustering, cfg.floor, cfg.p,
                          max_growth=cfg.max_growth, max_panel_length=cfg.max_panel_length)
        gen = JumpGenerator(scat, transform, t, x, "finite", delta)
        inst = RHInstance(disc, gen, _FiniteUndo(gen, l1, l2, cfg.angle), t, x)
        inst.diagnostics.extra.update({"mode": "finite", "lambda1": l1, "lambda2": l2,
                                       "lens_radius": R})
        return inst
    lam, nu = phase.level_line(resolution=41)
    keep = np.linspace(0, lam.size - 1, 11).round().astype(int)
    contour = build_deformed_contour("infinite", scat.E, level_line=(lam[keep], nu[keep]))
    disc = discretize(contour, cfg.nodes_per_piece, cfg.sigma_radius, cfg.clustering, cfg.floor,
                      cfg.p, max_growth=cfg.max_growth)
    gen = JumpGenerator(scat, transform, t, x, "infinite")
    height = np.asarray(contour.meta["profile_heights"])
    inst = RHInstance(disc, gen, _InfiniteUndo(gen, lam[keep], height), t, x)
    inst.diagnostics.extra.update({"mode": "infinite"})
    return inst


def build_instance(scat: ScatteringData, transform: BroadeningTransform, t: float, x: float,
                   config: SolverConfig | None = None, mode: str = "auto",
                   delta: DeltaFunction | None = None):
    """Pick the production path: closed form for ``t <= x``, deformed otherwise.

    For unbounded support ``auto`` uses the real-line problem when ``t > x``.
    """
    if t < 0 or x < 0:
        raise ValueError("t and x must be nonnegative")
    if mode == "sigma":
        return sigma_instance(scat, transform, t, x, config)
    if mode not in ("auto", "deformed"):
        raise ValueError(f"unknown solve mode {mode!r}")
    if t <= x:
        return TrivialInstance(scat, transform, t, x)
    if mode == "auto" and not transform.profile.bounded:
        return sigma_instance(scat, transform, t, x, config)
    return deformed_instance(scat, transform, t, x, config, delta)


def solve_rh(instance, cond_limit: float = COND_LIMIT):
    return instance.solve(cond_limit) if isinstance(instance, RHInstance) else instance.solve()


def evaluate_M(instance, z, side=None) -> np.ndarray:
    return instance.evaluate_M(z, side)
