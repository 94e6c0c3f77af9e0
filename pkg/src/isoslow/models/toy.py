"""Three-state toy system: planar Hopf normal form driving a fast third axis.

Cartesian coordinates z1 = r*cos(phi), z2 = r*sin(phi) with
    phi_dot = 1 + r^2
    r_dot   = k1 * r * (0.5 r^2 - 1)
    z3_dot  = 200 * z3 * (z3 - r0) * (k2*r0 - r)

k1 = +1 gives a stable origin and an unstable periodic orbit at
r = z3 = r0; k1 = -1 swaps the stability of both.  The (z1, z2) subsystem
is closed, which makes phase/amplitude quantities available in closed form
(see tests).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .._accel import maybe_njit
from .base import DynamicalSystem


@dataclass(frozen=True)
class ToyParams:
    k1: float = 1.0
    k2: float = 0.9
    r0: float = sqrt(2.0)

    def __post_init__(self):
        if self.r0 <= 0:
            raise ValueError("r0 must be positive")


@maybe_njit(cache=True)
def toy_rhs(t, x, u, p):
    k1 = p[0]
    k2 = p[1]
    r0 = p[2]
    z1, z2, z3 = x[0], x[1], x[2]
    r2 = z1 * z1 + z2 * z2
    r = np.sqrt(r2)
    out = np.empty(3)
    out[0] = k1 * z1 * (0.5 * r2 - 1.0) - z2 * (1.0 + r2)
    out[1] = k1 * z2 * (0.5 * r2 - 1.0) + z1 * (1.0 + r2)
    out[2] = 200.0 * z3 * (z3 - r0) * (k2 * r0 - r)
    return out


@maybe_njit(cache=True)
def toy_jac(t, x, p):
    k1 = p[0]
    k2 = p[1]
    r0 = p[2]
    z1, z2, z3 = x[0], x[1], x[2]
    r2 = z1 * z1 + z2 * z2
    r = np.sqrt(r2)
    J = np.empty((3, 3))
    J[0, 0] = k1 * (0.5 * r2 - 1.0) + k1 * z1 * z1 - 2.0 * z1 * z2
    J[0, 1] = k1 * z1 * z2 - (1.0 + r2) - 2.0 * z2 * z2
    J[0, 2] = 0.0
    J[1, 0] = k1 * z1 * z2 + (1.0 + r2) + 2.0 * z1 * z1
    J[1, 1] = k1 * (0.5 * r2 - 1.0) + k1 * z2 * z2 + 2.0 * z1 * z2
    J[1, 2] = 0.0
    if r > 1e-300:
        c = -200.0 * z3 * (z3 - r0) / r
        J[2, 0] = c * z1
        J[2, 1] = c * z2
    else:
        J[2, 0] = 0.0
        J[2, 1] = 0.0
    J[2, 2] = 200.0 * (2.0 * z3 - r0) * (k2 * r0 - r)
    return J


def build_toy(params: ToyParams | None = None, **overrides) -> DynamicalSystem:
    if params is None:
        params = ToyParams(**overrides)
    elif overrides:
        raise TypeError("pass either params or keyword overrides, not both")
    pars = np.array([params.k1, params.k2, params.r0], dtype=float)
    return DynamicalSystem(
        name="toy",
        dim=3,
        pars=pars,
        rhs=toy_rhs,
        jac=toy_jac,
        input_coupling=np.zeros(3),
        time_unit="dimensionless",
        state_labels=("z1", "z2", "z3"),
        meta={"params": params},
    )
