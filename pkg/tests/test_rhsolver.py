import numpy as np
import pytest

from mbrh.contour import Contour, OrientedPiece, build_sigma, discretize
from mbrh.rhsolver import (DeltaFunction, JumpGenerator, RHError, RHInstance, SolverConfig,
                           TrivialInstance, build_instance, delta_scalar, sigma_instance,
                           solve_trivial_region)

PROBES = np.array([0.3 + 0.7j, 2 + 3j, -4 + 0.2j, 7 - 1j, -0.5 + 2j, 1 - 1j, -2 - 0.5j, 5j, -5j,
                   0.1 + 0.1j])
S2 = np.array([[0, -1j], [1j, 0]])


class _Identity:
    def matrices(self, disc):
        return np.broadcast_to(np.eye(2, dtype=complex), (disc.size, 2, 2)).copy()


def test_identity_jump_gives_zero(box, data):
    disc = discretize(build_sigma(data.E), 64, 50.0)
    inst = RHInstance(disc, _Identity()).solve()
    assert np.all(inst.W == 0) and np.all(inst.u == 0)
    assert np.all(inst.evaluate_M(PROBES) == np.eye(2))


def test_jump_unit_determinant(scat, box, data, rng):
    gen = JumpGenerator(scat, box, 1.5, 0.5, "original")
    lam = rng.uniform(-20, 20, 100)
    lam = lam[np.abs(lam - data.re) > 1e-6]
    assert np.max(np.abs(np.linalg.det(gen.jump(lam, "real")) - 1)) < 1e-12
    nu = rng.uniform(1e-3, data.im - 1e-3, 50)
    assert np.max(np.abs(np.linalg.det(gen.jump(data.re + 1j * nu, "upper_segment")) - 1)) < 1e-12


def test_jump_off_support_growth(scat, box):
    gen = JumpGenerator(scat, box, 1.5, 0.5, "original")
    J = gen.jump(np.array([-3.0, 1.5, 4.0]), "real")
    assert np.all(J[:, 0, 0].real > 1)


def test_segment_jump_vanishes_at_endpoint(scat, box, data):
    gen = JumpGenerator(scat, box, 1.5, 0.5, "original")
    J = gen.jump(np.array([data.E - 1e-10j]), "upper_segment")[0]
    assert np.max(np.abs(J - np.eye(2))) < 1e-4


def test_deformed_jump_unit_determinant(solved):
    J = solved.generator.matrices(solved.disc)
    assert np.max(np.abs(np.linalg.det(J) - 1)) < 1e-10


def test_trivial_region_example(scat, box):
    from mbrh.phase import PhaseField
    z = 3j
    th = PhaseField(box, 1.0, 2.0).theta(z)
    M = solve_trivial_region(scat, box, 1.0, 2.0, z)[0]
    expect = np.array([[1, scat.r(z) * np.exp(-2j * th)], [0, 1]])
    assert np.max(np.abs(M - expect)) < 1e-14


def test_trivial_region_origin(scat, box):
    z = np.array([1 + 1j, -2 + 0.3j])
    M = solve_trivial_region(scat, box, 0.0, 0.0, z)
    assert np.max(np.abs(M[:, 0, 1] - scat.r(z))) < 1e-14


def test_trivial_region_rejects_late_times(scat, box):
    with pytest.raises(ValueError):
        solve_trivial_region(scat, box, 2.0, 1.0, 1j)
    with pytest.raises(ValueError):
        TrivialInstance(scat, box, 2.0, 1.0)


@pytest.mark.parametrize("t,x", [(0.5, 1.0), (1.0, 1.0)])
def test_sigma_matches_closed_form(scat, box, t, x):
    inst = sigma_instance(scat, box, t, x).solve()
    M = inst.evaluate_M(PROBES)
    ref = solve_trivial_region(scat, box, t, x, PROBES)
    assert np.max(np.abs(M - ref)) < 1e-6
    # on the front the real-line problem returns the average of both sides;
    # its non-oscillatory tail is cut at O(1 / radius)
    if t == x:
        assert abs(inst.field() - 0.5) < 1e-5
    else:
        assert abs(inst.field()) < 1e-6


def test_delta_limits(scat):
    d = DeltaFunction(scat, -3.0, 3.0, width=0.0)
    assert abs(d(np.array([1e4j]))[0] - 1) < 1e-3
    z = np.array([1 + 2j, -4 + 0.5j, 0.3 - 0.2j])
    # log(1 - r^2) is real on the rays, so reflection inverts delta
    assert np.max(np.abs(np.conj(d(np.conj(z))) * d(z) - 1)) < 1e-12


def test_delta_boundary_ratio(scat):
    lam = np.array([4.0])
    ratio = delta_scalar(scat, -3.0, 3.0, lam, side=1) / delta_scalar(scat, -3.0, 3.0, lam, side=-1)
    assert abs(ratio[0] - (1 - scat.r(lam)[0] ** 2)) < 1e-6


class _ScalarRays:
    """diag(1/(1-r^2), 1-r^2) on the outer real rays."""

    def __init__(self, scat):
        self.scat = scat

    def jump(self, z, role):
        q = 1 - self.scat.r(np.asarray(z).real) ** 2
        out = np.zeros(np.shape(z) + (2, 2), dtype=complex)
        out[..., 0, 0] = 1 / q
        out[..., 1, 1] = q
        return out

    def matrices(self, disc):
        return self.jump(disc.nodes, "ray")


def test_rank_one_scalar_problem(scat):
    pieces = [OrientedPiece("ray_left", -3.0, None, "ray", -1.0, True, "breakpoint", None, True),
              OrientedPiece("ray_right", 3.0, None, "ray", 1.0, False, "breakpoint", None, True)]
    c = Contour(pieces, [], True, "test", {})
    inst = RHInstance(discretize(c, 256, 1e6, clustering=0.2, floor=1e-12), _ScalarRays(scat))
    inst.solve()
    z = np.array([1j, 2 + 0.5j, -4 - 1j, 10j])
    M = inst.evaluate_M(z)
    ref = delta_scalar(scat, -3.0, 3.0, z)
    assert np.max(np.abs(M[:, 0, 0] - ref)) < 1e-6
    assert np.max(np.abs(M[:, 1, 1] - 1 / ref)) < 1e-6


def test_deformed_solve_properties(solved):
    M = solved.evaluate_M(PROBES)
    assert np.max(np.abs(np.linalg.det(M) - 1)) < 1e-8
    assert solved.jump_residual() < 1e-6
    assert solved.diagnostics.condition < 1e12


def test_deformed_symmetry(solved):
    z = PROBES[PROBES.imag != 0]
    M = solved.evaluate_M(z)
    Mc = solved.evaluate_M(np.conj(z))
    sym = S2 @ np.conj(Mc) @ S2
    assert np.max(np.abs(sym - M)) < 1e-8


def test_normalization_at_infinity(solved):
    M = solved.evaluate_M(np.array([1e4 * np.exp(1j * np.pi / 3)]))[0]
    assert np.max(np.abs(M - np.eye(2))) < 1e-3


def test_deformation_consistency(scat, box, solved):
    ref = sigma_instance(scat, box, 1.5, 0.5).solve()
    z = np.array([3j, -1 + 4j, 0.2 - 5j])
    tol = 10 * max(ref.jump_residual(), solved.jump_residual())
    assert np.max(np.abs(ref.evaluate_M(z) - solved.evaluate_M(z))) < max(tol, 1e-6)
    assert abs(ref.field() - solved.field()) < 1e-6


def test_unbounded_profile_uses_real_line():
    from mbrh.broadening import BroadeningTransform, make_profile
    from mbrh.spectral import ScatteringData, endpoint_from_boundary
    prof = make_profile({"type": "callable", "lambda": np.inf,
                         "func": lambda s: np.exp(-s**2) / np.sqrt(np.pi)})
    tr = BroadeningTransform(prof)
    sc = ScatteringData(endpoint_from_boundary(1.0, 1.0, tr))
    inst = build_instance(sc, tr, 1.0, 0.0).solve()
    assert inst.diagnostics.extra["mode"] == "sigma"
    assert abs(inst.field() - np.exp(1j)) < 1e-3


def test_refinement_reduces_residual(scat, box):
    res = [build_instance(scat, box, 1.5, 0.5, SolverConfig(nodes_per_piece=n)).solve()
           .jump_residual() for n in (32, 64)]
    assert res[1] < res[0]


def test_ill_conditioning_reported(scat, box):
    inst = build_instance(scat, box, 1.5, 0.5, SolverConfig(nodes_per_piece=32))
    with pytest.raises(RHError):
        inst.solve(cond_limit=1.0)


def test_build_instance_dispatch(scat, box):
    assert isinstance(build_instance(scat, box, 0.5, 1.0), TrivialInstance)
    assert build_instance(scat, box, 1.5, 0.5).diagnostics.extra["mode"] == "finite"
    with pytest.raises(ValueError):
        build_instance(scat, box, -1.0, 0.0)
    with pytest.raises(ValueError):
        build_instance(scat, box, 1.0, 0.0, mode="bogus")
