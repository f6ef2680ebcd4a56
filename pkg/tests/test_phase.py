import numpy as np
import pytest

from mbrh.phase import PhaseField, level_line, stationary_points, tau_xi


def re_i_theta_box(z, t, x):
    eta = z + np.log((1 - z) / (-1 - z)) / 8.0
    return (1j * (z * t - eta * x)).real


def test_theta_at_i(box):
    ph = PhaseField(box, 2.0, 1.0)
    assert abs(ph.theta(1j) - 1j * (1 - np.pi / 16)) < 1e-12
    assert abs(ph.re_i_theta(1j) - (-1 + np.pi / 16)) < 1e-12


def test_tau_xi():
    # Re(i theta) = (x nu / 4)(Pi - 1/xi) forces xi = x / (4 (t - x))
    tau, xi = tau_xi(2.0, 1.0)
    assert tau == 1.0 and xi == 0.25


@pytest.mark.parametrize("xi", [0.1, 1.0, 3.0, 10.0])
def test_stationary_points_box(box, xi):
    lm, lp = stationary_points(box, xi)
    assert abs(lp - np.sqrt(1 + xi)) < 1e-10
    assert abs(lm + np.sqrt(1 + xi)) < 1e-10


@pytest.mark.parametrize("xi", [0.1, 1.0, 3.0, 10.0])
def test_level_line(box, xi):
    lam, nu = level_line(box, xi, 100)
    assert np.max(np.abs(box.Pi(lam, nu) - 1 / xi)) < 1e-10
    assert np.max(np.abs(nu)) <= np.sqrt(xi) + 1e-12


@pytest.mark.parametrize("t,x", [(2.0, 0.5), (3.0, 1.0), (1.2, 1.0)])
def test_signature_matches_direct_evaluation(box, t, x):
    ph = PhaseField(box, t, x)
    g = np.linspace(-4, 4, 200)
    Z = (g[:, None] + 1j * g[None, :]).ravel()
    Z = Z[np.abs(Z.imag) > 0]
    ref = re_i_theta_box(Z, t, x)
    sig = ph.signature(Z)
    clear = np.abs(ref) > 1e-12
    assert np.all(sig[clear] == np.sign(ref[clear]))
