"""Slow manifolds of nonlinear ODE systems via isostable coordinates.

Computes slow invariant manifolds as intersections of stable/unstable
manifolds of equilibria, charts them with phase/isostable coordinates, and
builds reduced-order models for feedback control studies.
"""
from ._accel import USING_NUMBA
from .models import (
    CircadianParams,
    DynamicalSystem,
    HHParams,
    ToyParams,
    build_circadian,
    build_hh,
    build_toy,
)
from .odeint import (
    EventSpec,
    InputSignal,
    IntegrationError,
    IntegratorOptions,
    Trajectory,
    integrate,
    integrate_adjoint,
    integrate_dual,
    integrate_variational,
)

__version__ = "0.1.0"

__all__ = [
    "USING_NUMBA",
    "DynamicalSystem",
    "ToyParams",
    "HHParams",
    "CircadianParams",
    "build_toy",
    "build_hh",
    "build_circadian",
    "IntegratorOptions",
    "InputSignal",
    "EventSpec",
    "Trajectory",
    "IntegrationError",
    "integrate",
    "integrate_adjoint",
    "integrate_dual",
    "integrate_variational",
    "__version__",
]
