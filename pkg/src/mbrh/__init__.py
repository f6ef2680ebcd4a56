"""Riemann-Hilbert solver for the Maxwell-Bloch equations with a periodic pump."""

__version__ = "0.1.0"

from mbrh.estimators import MaxwellBlochRHSolver, OracleIntegrator  # noqa: E402

__all__ = ["MaxwellBlochRHSolver", "OracleIntegrator", "__version__"]
