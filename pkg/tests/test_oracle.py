import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mbrh.broadening import make_profile
from mbrh.oracle import (OracleError, OracleIntegrator, SimGrid, _cayley, compare_fields,
                         integrate_mb)

BOX = make_profile({"type": "box", "lambda": 1.0})


@pytest.fixture(scope="module")
def coarse():
    return integrate_mb(SimGrid(2.0, 1.0, 1 / 64, 32), BOX, 1.0, 1.0, store_times=(0.0, 1.0, 2.0))


def test_grid_validation():
    with pytest.raises(ValueError):
        SimGrid(1.0, 1.0, 0.3)
    with pytest.raises(ValueError):
        SimGrid(-1.0, 1.0, 0.25)
    g = SimGrid(2.0, 1.0, 0.25)
    assert (g.nt, g.nx) == (8, 4) and g.t[-1] == 2.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_cayley_preserves_norm(v):
    a, y = np.array(v[:3]), np.array(v[3:])
    assert abs(np.linalg.norm(_cayley(a, y)) - np.linalg.norm(y)) < 1e-12 * (1 + np.linalg.norm(y))


def test_cayley_inverse():
    a, y = np.array([0.3, -0.2, 0.0]), np.array([0.1, 0.4, -0.9])
    assert np.allclose(_cayley(-a, _cayley(a, y)), y, atol=1e-15)


def test_boundary_and_causality(coarse):
    g = coarse.grid
    # (0, 0) lies on the front, which stores the value ahead of it
    assert np.max(np.abs(coarse.E[1:, 0] - np.exp(1j * g.t[1:]))) < 1e-14
    ahead = np.subtract.outer(g.t, g.x) <= 0
    assert np.max(np.abs(coarse.E[ahead])) == 0.0


def test_normalization_conserved(coarse):
    assert coarse.diagnostics["normalization_drift"] < 1e-12
    N, rho = coarse.N, coarse.rho
    assert np.max(np.abs(N**2 + np.abs(rho) ** 2 - 1)) < 1e-12


def test_stored_slices(coarse):
    assert list(coarse.stored_t) == [0.0, 1.0, 2.0]
    assert np.all(coarse.N[0] == -1) and np.all(coarse.rho[0] == 0)


def test_self_convergence_second_order():
    E = {}
    for d in (1 / 32, 1 / 64, 1 / 128):
        sol = integrate_mb(SimGrid(2.0, 1.0, d, 32), BOX, 1.0, 1.0)
        E[d] = sol.interpolate(np.array([1.5, 1.75]), np.array([0.5, 0.25]))
    ratio = np.max(np.abs(E[1 / 32] - E[1 / 64])) / np.max(np.abs(E[1 / 64] - E[1 / 128]))
    assert ratio == pytest.approx(4.0, rel=0.1)


def test_rejects_unnormalized_quadrature():
    from dataclasses import replace
    prof = replace(BOX, scale=2.0 * BOX.scale)
    with pytest.raises(ValueError):
        integrate_mb(SimGrid(1.0, 1.0, 0.25, 8), prof, 1.0, 1.0)


def test_drift_abort():
    with pytest.raises(OracleError):
        integrate_mb(SimGrid(1.0, 1.0, 1 / 16, 8), BOX, 1.0, 1.0, drift_factor=-1e6)


def test_compare_fields(coarse):
    t, x = np.array([1.5, 0.5]), np.array([0.5, 1.0])
    E = coarse.interpolate(t, x)
    rep = compare_fields(coarse, t, x, E)
    assert rep["max_E"] == 0.0 and len(rep["table"]) == 2
    with pytest.raises(ValueError):
        compare_fields(coarse, np.array([3.0]), np.array([0.5]), np.array([0j]))
    rho = coarse.rho[1, [16, 32]]
    rep = compare_fields(coarse, np.array([1.0, 1.0]), np.array([0.25, 0.5]),
                         coarse.interpolate([1.0, 1.0], [0.25, 0.5]), rho)
    assert rep["max_rho"] == 0.0


def test_estimator_fit_predict():
    est = OracleIntegrator(T=1.0, L=0.5, delta=1 / 32, n_lambda=16)
    with pytest.raises(Exception):
        est.predict([[0.5, 0.25]])
    est.fit()
    out = est.predict([[0.5, 0.25], [0.25, 0.5]])
    assert out.shape == (2,) and out[1] == 0
    assert est.get_params()["delta"] == 1 / 32


def test_interpolation_respects_front(coarse):
    d = coarse.grid.delta
    on = coarse.interpolate(np.array([0.5]), np.array([0.5]))
    just_behind = coarse.interpolate(np.array([0.5 + 1e-3 * d]), np.array([0.5]))
    assert on[0] == 0
    # the jump across the front keeps its boundary size
    assert abs(just_behind[0] - 1.0) < 1e-2
    with pytest.raises(ValueError):
        coarse.interpolate(np.array([-0.1]), np.array([0.0]))
