"""Panel quadrature for Cauchy integrals over straight segments.

Every contour handled by the package is a union of straight panels.  On a
panel ``s = c + h*v`` with ``v`` in ``[-1, 1]`` a density is represented by
its values at ``p`` Gauss-Legendre nodes.  Far targets use the plain rule;
targets near or on a panel use product integration, which is exact for
polynomial densities of degree ``< p``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

# Bernstein-ellipse parameter below which the plain rule is replaced.
NEAR_RHO = 3.0


@lru_cache(maxsize=8)
def gauss_rule(p: int) -> tuple[np.ndarray, np.ndarray]:
    v, w = np.polynomial.legendre.leggauss(p)
    return v, w


@lru_cache(maxsize=8)
def _vandermonde_inverse(p: int) -> np.ndarray:
    v, _ = gauss_rule(p)
    V = np.vander(v, p, increasing=True)
    return np.linalg.inv(V)


@lru_cache(maxsize=8)
def _barycentric(p: int) -> np.ndarray:
    v, _ = gauss_rule(p)
    diff = v[:, None] - v[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def interpolation_weights(v0: np.ndarray, p: int) -> np.ndarray:
    """Rows of Lagrange weights evaluating the node interpolant at ``v0``."""
    v, _ = gauss_rule(p)
    bw = _barycentric(p)
    v0 = np.atleast_1d(np.asarray(v0, dtype=complex))
    d = v0[:, None] - v[None, :]
    hit = np.abs(d) < 1e-15
    d = np.where(hit, 1.0, d)
    tmp = bw[None, :] / d
    out = tmp / tmp.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    if rows.any():
        out[rows] = hit[rows].astype(float)
    return out


def product_weights(v0: np.ndarray, p: int, side: np.ndarray | None = None) -> np.ndarray:
    """Weights ``W`` with ``int_{-1}^{1} f(v)/(v - v0) dv = W @ f(nodes)``.

    ``v0`` may be complex (off the panel) or real in ``(-1, 1)``.  For real
    ``v0`` the integral is the principal value plus ``side * i*pi*f(v0)``,
    so ``side=+1`` gives the limit from ``Im v > 0``.
    """
    v0 = np.atleast_1d(np.asarray(v0, dtype=complex))
    on = np.abs(v0.imag) == 0.0
    on &= np.abs(v0.real) < 1.0
    q = np.empty((v0.size, p), dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        q0 = np.log((1.0 - v0) / (-1.0 - v0))
        pv = np.log(np.abs((1.0 - v0.real) / (1.0 + v0.real)))
    if on.any():
        s = np.zeros(v0.size) if side is None else np.broadcast_to(side, v0.shape)
        q0 = np.where(on, pv + 1j * np.pi * s, q0)
    q[:, 0] = q0
    for k in range(p - 1):
        q[:, k + 1] = v0 * q[:, k] + (1.0 - (-1.0) ** (k + 1)) / (k + 1)
    return q @ _vandermonde_inverse(p)


def bernstein_radius(v0: np.ndarray) -> np.ndarray:
    v0 = np.asarray(v0, dtype=complex)
    a = 0.5 * (np.abs(v0 - 1.0) + np.abs(v0 + 1.0))
    return a + np.sqrt(np.maximum(a * a - 1.0, 0.0))


class PanelSet:
    """Straight panels with Gauss-Legendre nodes.

    Parameters
    ----------
    a, b : array of complex
        Panel start and end points; orientation runs from ``a`` to ``b``.
    p : int
        Nodes per panel.
    """

    def __init__(self, a, b, p: int = 16):
        self.a = np.asarray(a, dtype=complex).ravel()
        self.b = np.asarray(b, dtype=complex).ravel()
        self.p = int(p)
        self.c = 0.5 * (self.a + self.b)
        self.h = 0.5 * (self.b - self.a)
        v, w = gauss_rule(self.p)
        self.v = v
        self.nodes = (self.c[:, None] + self.h[:, None] * v[None, :]).ravel()
        self.weights = (self.h[:, None] * w[None, :]).ravel()
        self.tangent = np.repeat(self.h / np.abs(self.h), self.p)

    @property
    def n_panels(self) -> int:
        return self.a.size

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    def locate(self, z: np.ndarray, tol: float = 1e-13):
        """Panel index and local coordinate for points lying on a panel."""
        z = self._off_endpoints(np.atleast_1d(np.asarray(z, dtype=complex)))
        v0 = (z[:, None] - self.c[None, :]) / self.h[None, :]
        ok = (np.abs(v0.imag) <= tol) & (np.abs(v0.real) <= 1.0 + tol)
        idx = np.where(ok.any(axis=1), ok.argmax(axis=1), -1)
        loc = np.where(idx >= 0, v0[np.arange(z.size), np.maximum(idx, 0)].real, np.nan)
        return idx, np.clip(loc, -1.0, 1.0)

    def matrix(self, z, panel: np.ndarray | None = None, local: np.ndarray | None = None,
               side: np.ndarray | None = None) -> np.ndarray:
        """Dense matrix ``K`` with ``int f(s)/(s - z) ds = K @ f(nodes)``.

        Targets listed with a ``panel`` index (``>= 0``) and real ``local``
        coordinate sit on that panel; ``side`` selects the principal value
        (0) or the left/right limits (+1/-1).
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        m = z.size
        p = self.p
        z = self._off_endpoints(z)
        v0 = (z[:, None] - self.c[None, :]) / self.h[None, :]
        if panel is not None:
            panel = np.asarray(panel)
            rows = np.nonzero(panel >= 0)[0]
            v0[rows, panel[rows]] = np.asarray(local, dtype=float)[rows]
        _, w = gauss_rule(p)
        with np.errstate(divide="ignore", invalid="ignore"):
            K = (w[None, None, :] / (self.v[None, None, :] - v0[:, :, None])).reshape(m, -1)
        near = bernstein_radius(v0) < NEAR_RHO
        if panel is not None:
            near[rows, panel[rows]] = True
        ii, jj = np.nonzero(near)
        if ii.size:
            sd = None
            if panel is not None and side is not None:
                sd = np.where(panel[ii] == jj, np.asarray(side)[ii] if np.ndim(side) else side, 0.0)
            W = product_weights(v0[ii, jj], p, sd)
            cols = jj[:, None] * p + np.arange(p)[None, :]
            K[ii[:, None], cols] = W
        return K

    def _off_endpoints(self, z: np.ndarray) -> np.ndarray:
        """Move targets sitting exactly on a panel end by a relative 1e-13.

        The logarithmic end terms of neighbouring panels cancel analytically;
        the shift keeps them finite so they also cancel numerically.
        """
        ends = np.concatenate([self.a, self.b])
        hit = np.zeros(z.shape, bool)
        for i0 in range(0, z.size, 4096):
            zz = z[i0:i0 + 4096, None]
            hit[i0:i0 + 4096] = np.any(np.abs(zz - ends[None, :]) <= 1e-15 * (1.0 + np.abs(zz)), axis=1)
        if np.any(hit):
            z = z.copy()
            z[hit] = z[hit] + 1e-13 * (1.0 + np.abs(z[hit]))
        return z

    def cauchy(self, f: np.ndarray, z, panel=None, local=None, side=None) -> np.ndarray:
        """``(1/2 pi i) int f(s)/(s - z) ds`` for node values ``f`` (n_nodes, ...)."""
        K = self.matrix(z, panel, local, side)
        f = np.asarray(f)
        out = K @ f.reshape(f.shape[0], -1)
        return (out / (2j * np.pi)).reshape((K.shape[0],) + f.shape[1:])

    def interpolate(self, f: np.ndarray, panel: np.ndarray, local: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        L = interpolation_weights(local, self.p)
        fp = f.reshape(self.n_panels, self.p, -1)[np.asarray(panel)]
        out = np.einsum("mj,mjk->mk", L, fp)
        return out.reshape((len(panel),) + f.shape[1:])
