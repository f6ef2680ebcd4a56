import math

import numpy as np
import pytest

from mbrh.contour import (Contour, ContourError, OrientedPiece, build_deformed_contour,
                          build_sigma, discretize)

E = complex(-0.5, 0.5)


def _roles(c):
    return [p.role for p in c.pieces]


def test_sigma_layout():
    c = build_sigma(E)
    seg = [p for p in c.pieces if "segment" in p.role]
    assert seg[0].start == E and seg[-1].end == np.conj(E)
    assert all(p.end.imag < p.start.imag for p in seg)  # oriented downward
    assert c.intersections == [complex(-0.5)]
    assert c.symmetric
    assert set(c.singular_points()) >= {E, np.conj(E)}


def test_sigma_on_imaginary_axis():
    c = build_sigma(1j)
    assert c.intersections == [0j]
    assert all(p.start.real == 0 for p in c.pieces if "segment" in p.role)


@pytest.mark.parametrize("bad", [0.5 + 0j, 1 - 1j])
def test_sigma_rejects_lower_endpoint(bad):
    with pytest.raises(ContourError):
        build_sigma(bad)


def test_finite_deformation_six_logical_pieces():
    c = build_deformed_contour("finite", E, -3.0, 3.0, Lambda=1.0)
    families = {"segment" if "segment" in r else r for r in _roles(c)}
    assert families == {"real", "segment", "lens_right_up", "lens_right_down",
                        "lens_left_up", "lens_left_down"}
    for p in c.pieces:
        if p.role.endswith("_up"):
            assert p.direction.imag > 0
    assert c.symmetric


@pytest.mark.parametrize("l1,l2", [(-3.0, 1.0), (-0.8, 3.0), (-3.0, 0.5)])
def test_finite_deformation_ordering(l1, l2):
    with pytest.raises(ContourError):
        build_deformed_contour("finite", E, l1, l2, Lambda=1.0)


def test_infinite_deformation_encloses_segment(box):
    from mbrh.phase import level_line
    lam, nu = level_line(box, 0.25, 41)
    keep = nu >= 0
    c = build_deformed_contour("infinite", E, level_line=(lam[keep], nu[keep]))
    assert c.symmetric
    upper = [p for p in c.pieces if p.role == "lens_upper"]
    rays = [p for p in upper if p.kind == "ray"]
    assert sorted(p.direction.real for p in rays) == [-1.0, 1.0]
    # above the segment at Re E
    heights = [p.start.imag for p in upper if p.kind == "segment"
               and min(p.start.real, p.end.real) <= E.real <= max(p.start.real, p.end.real)]
    assert heights and min(heights) > E.imag


def test_discretize_count_without_clustering():
    c = build_sigma(E)
    d = discretize(c, 64, 50.0, clustering=0.0)
    # the real line and the segment pair are two logical pieces
    assert d.size == 128
    real = d.nodes[d.node_role == "real"]
    # rays are cut at the radius measured from their anchor Re E
    assert np.all(np.abs(real - E.real) <= 50.0 + 1e-12)


def test_clearance_from_branch_points():
    d = discretize(build_sigma(E), 64, 50.0, clustering=0.25, floor=1e-9)
    seg = d.nodes[np.char.find(d.node_role.astype(str), "segment") >= 0]
    dist = np.min(np.abs(seg[:, None] - np.array([E, np.conj(E)])[None, :]))
    assert dist > 0


def test_ray_without_decay_rejected():
    c = build_sigma(E, decays=False)
    with pytest.raises(ContourError):
        discretize(c, 32, 10.0)


def _segment_contour(a, b):
    return Contour([OrientedPiece("real", a, b, "segment")], [], False, "test", {})


@pytest.mark.parametrize("z0", [0.5 + 0.3j, 2.0 - 0.1j, -0.2 + 0.05j])
def test_cauchy_of_one_on_segment(z0):
    exact = np.log((1.0 - z0) / (0.0 - z0))
    errs = []
    for n in (16, 32, 64):
        d = discretize(_segment_contour(0.0, 1.0), n, clustering=0.0)
        errs.append(abs(np.sum(d.weights / (d.nodes - z0)) - exact))
    assert errs[-1] < 1e-10
    assert all(b <= max(a / 2, 1e-14) for a, b in zip(errs, errs[1:]))


def test_held_out_points_avoid_nodes():
    d = discretize(build_sigma(E), 64, 50.0)
    z, idx = d.held_out(per_panel=2, margin=1e-6)
    assert z.size == idx.size > 0
    assert np.min(np.abs(z[:, None] - d.nodes[None, :])) > 0


def test_records_roundtrip():
    import json
    c = build_deformed_contour("finite", E, -3.0, 3.0, shape={"angle": math.pi / 4}, Lambda=1.0)
    recs = json.loads(c.dumps())
    assert len(recs) == len(c.pieces)
