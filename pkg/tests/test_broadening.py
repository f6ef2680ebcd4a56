import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from mbrh.broadening import BroadeningTransform, ProfileError, make_profile


def box_eta(z, L=1.0):
    """Closed-form transform of the unit-mass box on [-L, L]."""
    return z + np.log((L - z) / (-L - z)) / (8.0 * L)


def test_eta_at_i(box):
    assert abs(box.eta(1j) - 1j * (1 + np.pi / 16)) < 1e-12


@pytest.mark.parametrize("z", [0.3 + 0.2j, -2 + 1e-3j, 5 - 4j, -0.1 - 0.7j, 1j * 1e3])
def test_eta_matches_log_form(box, z):
    assert abs(box.eta(z) - box_eta(z)) < 1e-12


def test_eta_boundary_values_at_zero(box):
    assert abs(box.eta(0.0, "plus") - 1j * np.pi / 8) < 1e-12
    assert abs(box.eta(0.0, "minus") + 1j * np.pi / 8) < 1e-12


def test_plemelj_jump_on_support(box):
    lam = np.linspace(-0.99, 0.99, 100)
    jump = box.eta(lam, "plus") - box.eta(lam, "minus")
    assert np.max(np.abs(jump - 0.5j * np.pi * box.profile(lam))) < 1e-8


def test_raised_cosine_against_quad():
    tr = BroadeningTransform(make_profile({"type": "raised_cosine", "lambda": 2.0}))
    z = 0.4 + 0.3j
    re = quad(lambda s: (tr.profile(s) / (s - z)).real, -2, 2, limit=200)[0]
    im = quad(lambda s: (tr.profile(s) / (s - z)).imag, -2, 2, limit=200)[0]
    assert abs(tr.eta(z) - (z + 0.25 * (re + 1j * im))) < 1e-9


def test_Pi_closed_form(box):
    assert abs(box.Pi(0.0, 1.0) - np.pi / 4) < 1e-14


@pytest.mark.parametrize("nu", [0.5, 1.0, 3.0])
def test_first_kernel_moment_at_center(box, nu):
    I1, _ = box.kernel_moment(0.0, nu, 2)
    assert abs(I1 + 1 / (1 + nu**2)) < 1e-13


@pytest.mark.parametrize("lam", [1.5, -2.0, 4.0])
def test_first_kernel_moment_off_support(box, lam):
    I1, _ = box.kernel_moment(lam, 0.0, 2)
    assert abs(I1 - 1 / (lam**2 - 1)) < 1e-13


def test_second_moment_rejects_support_at_axis(box):
    with pytest.raises(ValueError):
        box.kernel_moment(0.2, 0.0, 2)


@pytest.mark.parametrize("spec", [
    {"type": "box", "lambda": 1.0, "height": 0.7},
    {"type": "box", "lambda": -1.0},
    {"type": "table", "samples": [[-1, 0], [0, -1], [1, 0]]},
    {"type": "nonsense"},
])
def test_invalid_profiles_rejected(spec):
    with pytest.raises(ProfileError):
        make_profile(spec)


def test_normalize_rescales_mass():
    prof = make_profile({"type": "box", "lambda": 1.0, "height": 0.7}, normalize=True)
    assert abs(prof.mass() - 1.0) < 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(-10, 10), st.floats(1e-6, 10), st.sampled_from([1, -1]))
def test_sign_of_imaginary_part_preserved(box, re, im, sgn):
    z = complex(re, sgn * im)
    assert np.sign(box.eta(z).imag) == sgn
