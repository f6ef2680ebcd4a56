"""Oriented piecewise-straight contours and their panel discretization.

A contour is a list of oriented pieces: finite segments and rays.  Each
piece carries a ``role`` naming the jump it supports (``real``,
``upper_segment``, ``lower_segment``, ``lens_right_up`` ...) and endpoint tags
controlling refinement:

* ``quarter``     inverse-fourth-root endpoint (branch points ``E``, ``conj E``)
* ``breakpoint``  jump data not smooth there (support ends of the profile)
* ``junction``    several pieces meet; data smooth on each piece

The ``+`` side of a piece is on its left.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from mbrh._cauchy import PanelSet

SINGULAR_TAGS = ("quarter", "breakpoint")


class ContourError(ValueError):
    pass


@dataclass(frozen=True)
class OrientedPiece:
    """A finite segment ``start -> end`` or a ray.

    For rays ``start`` is the finite anchor, ``direction`` the unit vector
    pointing to infinity, and ``incoming`` tells whether the orientation runs
    from infinity to the anchor.
    """

    role: str
    start: complex
    end: complex | None = None
    kind: str = "segment"
    direction: complex = 1.0
    incoming: bool = False
    start_tag: str | None = None
    end_tag: str | None = None
    decays: bool = False

    def __post_init__(self):
        if self.kind not in ("segment", "ray"):
            raise ContourError(f"unknown piece kind {self.kind!r}")
        if self.kind == "segment" and (self.end is None or self.end == self.start):
            raise ContourError("segment needs two distinct endpoints")

    def endpoints(self, radius: float | None = None) -> tuple[complex, complex]:
        """Oriented endpoints; rays are cut at distance ``radius`` from the anchor."""
        if self.kind == "segment":
            return complex(self.start), complex(self.end)
        if radius is None:
            raise ContourError("ray endpoints need a truncation radius")
        far = self.start + radius * self.direction
        return (far, self.start) if self.incoming else (self.start, far)

    def tags(self) -> tuple[str | None, str | None]:
        """Tags at the oriented start and end (``None`` at a ray's far end)."""
        if self.kind == "segment":
            return self.start_tag, self.end_tag
        return (None, self.start_tag) if self.incoming else (self.start_tag, None)

    def conjugate(self) -> "OrientedPiece":
        """Image under ``z -> conj z`` with the orientation kept for real pieces."""
        if self.kind == "segment":
            a, b = np.conj(self.start), np.conj(self.end)
            return OrientedPiece(self.role, a, b, "segment", 1.0, False,
                                 self.start_tag, self.end_tag, self.decays)
        return OrientedPiece(self.role, np.conj(self.start), None, "ray", np.conj(self.direction),
                             self.incoming, self.start_tag, None, self.decays)

    def to_record(self) -> dict:
        rec = {"role": self.role, "kind": self.kind, "start": [self.start.real, self.start.imag]}
        if self.kind == "segment":
            rec["end"] = [self.end.real, self.end.imag]
        else:
            rec["direction"] = [self.direction.real, self.direction.imag]
            rec["incoming"] = self.incoming
        rec["tags"] = list(self.tags())
        return rec


def _same_set(p: OrientedPiece, q: OrientedPiece, tol=1e-12) -> bool:
    if p.kind != q.kind:
        return False
    if p.kind == "segment":
        return {_key(p.start, tol), _key(p.end, tol)} == {_key(q.start, tol), _key(q.end, tol)}
    return abs(p.start - q.start) < tol and abs(p.direction - q.direction) < tol


def _key(z, tol):
    return (round(z.real / tol), round(z.imag / tol))


@dataclass
class Contour:
    pieces: list[OrientedPiece]
    intersections: list[complex] = field(default_factory=list)
    symmetric: bool = True
    mode: str = "sigma"
    meta: dict = field(default_factory=dict)

    def check_symmetry(self) -> bool:
        """Every piece has a conjugate partner (as a point set)."""
        for p in self.pieces:
            img = p.conjugate()
            if not any(_same_set(img, q) for q in self.pieces):
                return False
        return True

    def singular_points(self) -> list[complex]:
        """Endpoints tagged ``quarter`` or ``breakpoint``."""
        out = []
        for p in self.pieces:
            for z, tag in ((p.start, p.start_tag), (p.end, p.end_tag)):
                if z is not None and tag in SINGULAR_TAGS and all(abs(z - q) > 1e-12 for q in out):
                    out.append(complex(z))
        return out

    def roles(self) -> list[str]:
        return [p.role for p in self.pieces]

    def to_records(self, disc: "Discretization | None" = None) -> list[dict]:
        recs = [p.to_record() for p in self.pieces]
        if disc is not None:
            for k, rec in enumerate(recs):
                sel = disc.node_piece == k
                rec["nodes"] = [[z.real, z.imag] for z in disc.nodes[sel]]
                rec["weights"] = [[w.real, w.imag] for w in disc.weights[sel]]
        return recs

    def dumps(self, disc=None) -> str:
        return json.dumps(self.to_records(disc))


def build_sigma(E: complex, breakpoints=(), decays: bool = True) -> Contour:
    """The undeformed contour: real line plus the downward segment ``(E, conj E)``.

    ``breakpoints`` are extra real points (support ends) where the real line
    is split and refined.
    """
    E = complex(E)
    if not E.imag > 0:
        raise ContourError("the endpoint E must lie in the upper half-plane")
    cuts = _real_cuts(E.real, breakpoints)
    pieces = []
    first = cuts[0]
    pieces.append(OrientedPiece("real", first[0], None, "ray", -1.0, True, first[1], None, decays))
    for (a, ta), (b, tb) in zip(cuts[:-1], cuts[1:]):
        pieces.append(OrientedPiece("real", a, b, "segment", start_tag=ta, end_tag=tb))
    last = cuts[-1]
    pieces.append(OrientedPiece("real", last[0], None, "ray", 1.0, False, last[1], None, decays))
    pieces += _segment_pieces(E)
    c = Contour(pieces, [complex(E.real)], True, "sigma", {"E": E})
    c.symmetric = c.check_symmetry()
    return c


def _segment_pieces(E: complex) -> list[OrientedPiece]:
    m = complex(E.real)
    return [OrientedPiece("upper_segment", E, m, start_tag="quarter", end_tag="junction"),
            OrientedPiece("lower_segment", m, np.conj(E), start_tag="junction", end_tag="quarter")]


def _real_cuts(reE: float, breakpoints, lo=None, hi=None, junctions=()):
    pts = {float(reE): "junction"}
    for j in junctions:
        j = float(j)
        if all(abs(j - q) > 1e-12 for q in pts):
            pts[j] = "junction"
    for b in breakpoints:
        b = float(b)
        near = [q for q in pts if abs(b - q) < 1e-12]
        if near and near[0] == float(reE):
            continue
        for q in near:
            del pts[q]
        pts[b] = "breakpoint"
    if lo is not None:
        pts[float(lo)] = "junction"
    if hi is not None:
        pts[float(hi)] = "junction"
    keys = sorted(pts)
    if lo is not None:
        keys = [k for k in keys if lo <= k <= hi]
    return [(complex(k), pts[k]) for k in keys]


def build_deformed_contour(mode: str, E: complex, lambda1: float | None = None,
                           lambda2: float | None = None, level_line=None,
                           shape: dict | None = None, Lambda: float | None = None,
                           breakpoints=(), junctions=()) -> Contour:
    """Contour after lens opening.

    finite mode: real segment ``[lambda1, lambda2]``, the segment ``(E, conj E)``
    and four rays (lenses) leaving ``lambda1`` and ``lambda2`` at the opening
    angle ``shape['angle']`` (default ``pi/4``).

    ``junctions`` are extra real split points without refinement (finite mode).

    infinite mode: two conjugate polylines through ``level_line`` samples
    ``(lam, nu)`` scaled by ``shape['fraction']`` and lifted over the segment.
    """
    shape = dict(shape or {})
    E = complex(E)
    if not E.imag > 0:
        raise ContourError("the endpoint E must lie in the upper half-plane")
    if mode == "finite":
        if lambda1 is None or lambda2 is None:
            raise ContourError("finite mode needs lambda1 and lambda2")
        L = float(Lambda) if Lambda is not None else 0.0
        if not (lambda1 < -L and lambda1 < E.real and lambda2 > L and lambda2 > E.real):
            raise ContourError("lens anchors must satisfy lambda1 < -Lambda, lambda1 < Re E, "
                               "lambda2 > Lambda")
        alpha = float(shape.get("angle", math.pi / 4))
        if not 0 < alpha < math.pi / 2:
            raise ContourError("lens opening angle must lie in (0, pi/2)")
        cuts = _real_cuts(E.real, [b for b in breakpoints if lambda1 < b < lambda2],
                          lambda1, lambda2, [j for j in junctions if lambda1 < j < lambda2])
        pieces = []
        for (a, ta), (b, tb) in zip(cuts[:-1], cuts[1:]):
            pieces.append(OrientedPiece("real", a, b, "segment", start_tag=ta, end_tag=tb))
        pieces += _segment_pieces(E)
        up_r = complex(math.cos(alpha), math.sin(alpha))
        up_l = complex(-math.cos(alpha), math.sin(alpha))
        l1, l2 = complex(lambda1), complex(lambda2)
        pieces += [
            OrientedPiece("lens_right_up", l2, None, "ray", up_r, False, "junction", None, True),
            OrientedPiece("lens_right_down", l2, None, "ray", np.conj(up_r), False, "junction", None, True),
            OrientedPiece("lens_left_up", l1, None, "ray", up_l, True, "junction", None, True),
            OrientedPiece("lens_left_down", l1, None, "ray", np.conj(up_l), True, "junction", None, True),
        ]
        c = Contour(pieces, [complex(E.real), l1, l2], True, "finite",
                    {"E": E, "lambda1": lambda1, "lambda2": lambda2, "angle": alpha})
        c.symmetric = c.check_symmetry()
        return c
    if mode == "infinite":
        if level_line is None:
            raise ContourError("infinite mode needs level-line samples")
        lam, nu = (np.asarray(a, dtype=float) for a in level_line)
        if np.any(nu < 0):
            raise ContourError("level-line samples must be given for the upper branch (nu >= 0)")
        if lam.size < 2 or np.any(np.diff(lam) <= 0):
            raise ContourError("level-line abscissae must increase")
        if not np.allclose(lam, -lam[::-1], atol=1e-9 * max(1.0, np.abs(lam).max())) and \
                not shape.get("allow_asymmetric", True):
            raise ContourError("level-line samples are not symmetric")
        frac = float(shape.get("fraction", 0.5))
        floor = float(shape.get("floor", 0.05))
        lift = float(shape.get("lift", 0.25))
        height = np.maximum(frac * nu, floor)
        # keep the segment strictly inside the lens region
        width = float(shape.get("lift_width", 1.0))
        bump = (E.imag + lift) * np.exp(-((lam - E.real) / width) ** 2)
        height = np.maximum(height, bump)
        pts = lam + 1j * height
        pieces = []
        left_dir = -1.0 + 0.0j
        pieces.append(OrientedPiece("lens_upper", complex(pts[0]), None, "ray", left_dir, True,
                                    "junction", None, True))
        for a, b in zip(pts[:-1], pts[1:]):
            pieces.append(OrientedPiece("lens_upper", complex(a), complex(b), "segment",
                                        start_tag="junction", end_tag="junction"))
        pieces.append(OrientedPiece("lens_upper", complex(pts[-1]), None, "ray", 1.0, False,
                                    "junction", None, True))
        lower = [OrientedPiece("lens_lower", p.start.conjugate(),
                               None if p.end is None else p.end.conjugate(), p.kind,
                               np.conj(p.direction), p.incoming, p.start_tag, p.end_tag, p.decays)
                 for p in pieces]
        c = Contour(pieces + lower, [], True, "infinite",
                    {"E": E, "profile_heights": height})
        c.symmetric = c.check_symmetry()
        return c
    raise ContourError(f"unknown deformation mode {mode!r}")


def _graded_edges(n_panels: int, tag_a, tag_b, ratio: float, floor: float, length: float):
    """Panel edges in ``[0, 1]`` with geometric refinement toward tagged ends."""
    edges = list(np.linspace(0.0, 1.0, n_panels + 1))
    h = 1.0 / n_panels
    levels = 0
    if ratio > 0:
        levels = max(0, int(math.ceil(math.log(max(floor / (h * length), 1e-300)) / math.log(ratio))))
    if tag_a in SINGULAR_TAGS:
        edges += list(h * ratio ** np.arange(1, levels + 1))
    if tag_b in SINGULAR_TAGS:
        edges += list(1.0 - h * ratio ** np.arange(1, levels + 1))
    return np.unique(np.clip(edges, 0.0, 1.0))


def _ray_edges(n_panels: int, radius: float, first: float, tag=None, ratio: float = 0.25,
               floor: float = 1e-9, max_growth: float | None = None,
               max_panel: float | None = None):
    """Radial panel edges ``0 = r_0 < ... = radius`` growing geometrically.

    ``max_growth`` caps the size ratio of neighbouring panels (adding panels
    if needed); ``max_panel`` splits panels longer than that.  A singular anchor additionally gets panels shrinking toward it.
    """
    if max_growth is not None and radius > first * n_panels:
        need = math.log(1.0 + radius * (max_growth - 1.0) / first) / math.log(max_growth)
        n_panels = max(n_panels, int(math.ceil(need)))
    if radius <= first * n_panels or n_panels == 1:
        edges = np.linspace(0.0, radius, n_panels + 1)
    else:
        f = lambda g: first * (g**n_panels - 1.0) / (g - 1.0) - radius
        g = brentq(f, 1.0 + 1e-12, 2.0 + (radius / first) ** (1.0 / (n_panels - 1)))
        steps = first * g ** np.arange(n_panels)
        edges = np.concatenate([[0.0], np.cumsum(steps)])
        edges[-1] = radius
    if max_panel is not None:
        parts = np.maximum(1, np.ceil(np.diff(edges) / max_panel)).astype(int)
        edges = np.concatenate([np.linspace(a, b, k + 1)[:-1]
                                for a, b, k in zip(edges[:-1], edges[1:], parts)] + [[radius]])
    if tag in SINGULAR_TAGS and ratio > 0:
        h = edges[1]
        levels = max(0, int(math.ceil(math.log(max(floor / h, 1e-300)) / math.log(ratio))))
        edges = np.unique(np.concatenate([edges, h * ratio ** np.arange(1, levels + 1)]))
    return edges


def _group(role: str) -> str:
    if role in ("upper_segment", "lower_segment"):
        return "segment"
    return role


def _effective_length(piece: OrientedPiece, radius: float, first: float) -> float:
    if piece.kind == "segment":
        return abs(piece.end - piece.start)
    # rays are panelled geometrically; weigh them by the number of doublings
    return first * (1.0 + math.log2(max(radius / first, 1.0)))


def _allocate(total: int, lengths: list[float]) -> list[int]:
    """Split ``total`` panels proportionally to ``lengths`` with at least one each."""
    k = len(lengths)
    if total <= k:
        return [1] * k
    share = np.asarray(lengths, float)
    share = share / share.sum() * total
    out = np.maximum(1, np.floor(share)).astype(int)
    while out.sum() > total:
        j = int(np.argmax(out - share))
        out[j] -= 1
    while out.sum() < total:
        j = int(np.argmax(share - out))
        out[j] += 1
    return out.tolist()


@dataclass
class Discretization:
    """Panel tables for a contour.

    ``panels`` holds every node and weight; ``panel_piece`` maps panels to
    pieces and ``node_piece`` nodes to pieces.
    """

    contour: Contour
    panels: PanelSet
    panel_piece: np.ndarray
    truncation_radius: float
    clearance: float

    @property
    def nodes(self) -> np.ndarray:
        return self.panels.nodes

    @property
    def weights(self) -> np.ndarray:
        return self.panels.weights

    @property
    def node_piece(self) -> np.ndarray:
        return np.repeat(self.panel_piece, self.panels.p)

    @property
    def node_role(self) -> np.ndarray:
        roles = np.array(self.contour.roles())
        return roles[self.node_piece]

    @property
    def size(self) -> int:
        return self.panels.n_nodes

    def held_out(self, per_panel: int = 1, margin: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """Points between consecutive Gauss nodes (not collocation points).

        Points closer than ``margin`` to an intersection or a singular endpoint
        are dropped.  Returns the points and the owning panel indices.
        """
        v = self.panels.v
        mids = 0.5 * (v[:-1] + v[1:])
        pick = mids[np.linspace(0, mids.size - 1, per_panel).round().astype(int)]
        z = (self.panels.c[:, None] + self.panels.h[:, None] * pick[None, :]).ravel()
        idx = np.repeat(np.arange(self.panels.n_panels), pick.size)
        avoid = list(self.contour.intersections) + self.contour.singular_points()
        if margin > 0 and avoid:
            d = np.min(np.abs(z[:, None] - np.asarray(avoid)[None, :]), axis=1)
            keep = d > margin
            z, idx = z[keep], idx[keep]
        return z, idx


def discretize(contour: Contour, nodes_per_piece: int = 128, truncation_radius: float = 50.0,
               clustering: float = 0.25, floor: float = 1e-9, p: int = 16,
               ray_first: float = 0.5, radius_by_piece: dict | None = None,
               max_growth: float | None = None,
               max_panel_length: float | None = None,
               max_ray_panel: float | None = None) -> Discretization:
    """Panelize a contour.

    Pieces sharing a role family (the real line, the segment ``(E, conj E)``,
    each lens) form one logical piece that receives ``nodes_per_piece`` Gauss
    nodes on panels distributed by length; rays use geometrically growing
    panels out to ``truncation_radius``.  Ends tagged ``quarter`` or
    ``breakpoint`` get extra panels shrinking by the factor ``clustering``
    down to the absolute size ``floor`` (``clustering=0`` disables this, so
    the node count is exactly ``nodes_per_piece`` per logical piece).
    ``max_growth`` bounds the growth of ray panels and ``max_panel_length``
    the size of panels on finite pieces, ``max_ray_panel`` the size of ray
    panels (for oscillatory jumps); all three may add panels.
    """
    if nodes_per_piece < 1:
        raise ContourError("nodes_per_piece must be positive")
    n_panels = max(1, int(math.ceil(nodes_per_piece / p)))

    def radius_of(k):
        if radius_by_piece is None:
            return truncation_radius
        return radius_by_piece.get(k, truncation_radius)

    for k, piece in enumerate(contour.pieces):
        if piece.kind == "ray" and not piece.decays:
            raise ContourError(f"piece {k} ({piece.role}) reaches infinity without decay")
    groups: dict[str, list[int]] = {}
    for k, piece in enumerate(contour.pieces):
        groups.setdefault(_group(piece.role), []).append(k)
    counts = {}
    for members in groups.values():
        lengths = [_effective_length(contour.pieces[k], radius_of(k), ray_first) for k in members]
        for k, c in zip(members, _allocate(n_panels, lengths)):
            counts[k] = c

    A, B, owner = [], [], []
    for k, piece in enumerate(contour.pieces):
        npan = counts[k]
        if piece.kind == "segment" and max_panel_length:
            npan = max(npan, int(math.ceil(abs(piece.end - piece.start) / max_panel_length)))
        if piece.kind == "ray":
            R = radius_of(k)
            rho = _ray_edges(npan, R, min(ray_first, R / npan), piece.start_tag, clustering, floor,
                             max_growth, max_ray_panel)
            pts = piece.start + rho * piece.direction
            if piece.incoming:
                pts = pts[::-1]
        else:
            a, b = piece.endpoints()
            ta, tb = piece.tags()
            u = _graded_edges(npan, ta, tb, clustering, floor, abs(b - a))
            pts = a + (b - a) * u
        A.append(pts[:-1])
        B.append(pts[1:])
        owner.append(np.full(len(pts) - 1, k))
    panels = PanelSet(np.concatenate(A), np.concatenate(B), p)
    owner = np.concatenate(owner)
    clear = float(np.min(np.abs(np.concatenate([panels.nodes - a for a in contour.intersections]))))\
        if contour.intersections else float("inf")
    return Discretization(contour, panels, owner, truncation_radius, clear)
