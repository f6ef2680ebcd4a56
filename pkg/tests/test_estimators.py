import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mbrh import MaxwellBlochRHSolver, OracleIntegrator
from mbrh.estimators import sweep
from mbrh.rhsolver import SolverConfig

X = np.array([[1.5, 0.5], [0.5, 1.0], [1.0, 0.0]])


@pytest.fixture(scope="module")
def fitted():
    return MaxwellBlochRHSolver(nodes_per_piece=64).fit()


def test_params_roundtrip():
    est = MaxwellBlochRHSolver(A0=0.8, n_jobs=2)
    assert clone(est).get_params() == est.get_params()
    assert isinstance(OracleIntegrator(), OracleIntegrator)


def test_predict_requires_fit():
    with pytest.raises(NotFittedError):
        MaxwellBlochRHSolver().predict(X)


def test_predict_shapes_and_values(fitted):
    E = fitted.predict(X)
    assert E.shape == (3,) and E.dtype == complex
    assert E[1] == 0
    assert abs(E[2] - np.exp(1j)) < 1e-8


def test_single_point_input(fitted):
    assert fitted.predict([1.5, 0.5]).shape == (1,)


@pytest.mark.parametrize("bad", [np.zeros((2, 3)), [[-1.0, 0.5]], [[np.nan, 0.1]]])
def test_invalid_points(fitted, bad):
    with pytest.raises(ValueError):
        fitted.predict(bad)


def test_density_prediction(fitted):
    F = fitted.predict_density(X[:2], [0.0, 2.0])
    assert F.shape == (2, 2, 2, 2)
    assert np.max(np.abs(F[1] + np.diag([1.0, -1.0]))) < 1e-12


def test_threaded_sweep_matches_serial(fitted):
    t = np.array([1.2, 1.6, 0.3, 1.9])
    x = np.array([0.2, 0.4, 0.8, 0.9])
    cfg = SolverConfig(nodes_per_piece=64)
    a = sweep(fitted.scattering_, fitted.transform_, cfg, t, x, threads=1)
    b = sweep(fitted.scattering_, fitted.transform_, cfg, t, x, threads=3)
    assert np.array_equal(a.E, b.E)


def test_rh_matches_oracle_estimator(fitted):
    orc = OracleIntegrator(T=2.0, L=1.0, delta=1 / 128).fit()
    pts = np.array([[1.5, 0.5], [1.8, 0.3]])
    assert np.max(np.abs(orc.predict(pts) - fitted.predict(pts))) < 1e-4
