"""Standard equilibria of the built-in systems from generic initial guesses.

Each routine produces the Newton-quality guesses the solvers in
``equilibria`` need: relaxation runs for stable objects, and a
firing-threshold bisection along the slow eigenplane for the Hodgkin-Huxley
unstable orbit (trajectories pinched onto the basin boundary converge to
the orbit).
"""
from __future__ import annotations

import numpy as np

from .equilibria import (
    FixedPointData,
    PeriodicOrbitData,
    find_fixed_point,
    find_periodic_orbit,
)
from .models import circadian_start_state, hh_rest_guess
from .models.base import DynamicalSystem
from .odeint import OPTS_BULK, OPTS_MANIFOLD, EventSpec, IntegratorOptions, integrate

AP_THRESHOLD = 50.0  # mV; action-potential detection level on any V_j

# shooting accuracy is limited by the flow integration; keep it well below
# the requested closure tolerances
OPTS_SHOOT = IntegratorOptions(rel_tol=1e-11, abs_tol=1e-13)


def hh_firing_events(system: DynamicalSystem, terminal: bool = True):
    """Rising crossings of V_j = 50 mV for each neuron."""
    evs = []
    for j in range(4):
        idx = 4 * j
        evs.append(
            EventSpec(
                fn=(lambda t, x, i=idx: x[i] - AP_THRESHOLD),
                direction=1,
                terminal=terminal,
            )
        )
    return evs


def locate_toy_fixed_point(system: DynamicalSystem) -> FixedPointData:
    return find_fixed_point(system, np.array([0.1, 0.1, 0.1]), newton_tol=1e-13)


def locate_toy_orbit(system: DynamicalSystem, retain: int = 2) -> PeriodicOrbitData:
    r0 = system.pars[2]
    guess = np.array([0.995 * r0, 0.0, 1.005 * r0])
    return find_periodic_orbit(
        system, guess, 1.05 * 2.0 * np.pi / 3.0, shoot_tol=1e-11, retain=retain,
        opts=OPTS_SHOOT,
    )


def locate_hh_fixed_point(
    system: DynamicalSystem, settle: float = 400.0
) -> FixedPointData:
    traj, _ = integrate(system, hh_rest_guess(system), (0.0, settle), None, OPTS_BULK)
    return find_fixed_point(system, traj.states[-1], newton_tol=1e-11)


def _fires(system, x0, horizon=250.0, window=60.0):
    """Persistent firing: an AP inside the trailing window of the horizon.

    Initial conditions far from the fixed point can spike once while the
    gating variables catch up even when they lie inside the basin, so only
    late spikes mark the firing attractor.
    """
    _, recs = integrate(
        system,
        x0,
        (0.0, horizon),
        None,
        OPTS_BULK,
        events=hh_firing_events(system, terminal=False),
    )
    return any(r.t > horizon - window for r in recs)


def locate_hh_unstable_orbit(
    system: DynamicalSystem,
    fp: FixedPointData,
    settle: float = 35.0,
    segments: int = 4,
    retain: int = 2,
) -> PeriodicOrbitData:
    """Bisect the firing threshold along the slow eigenplane, ride the basin
    boundary onto the orbit, then shoot.

    The bisection depth and the settle time are budgeted together: the
    boundary offset grows like exp(kappa*t), so a ~1e-12 bracket keeps the
    settle endpoint within ~1e-9 of the orbit for kappa ~ 0.2/ms.
    """
    d = fp.right_eigenvectors[:, 0].real
    d = d / np.linalg.norm(d)
    lo, hi = 0.0, 2.0
    while not _fires(system, fp.x0 + hi * d):
        lo = hi
        hi *= 2.0
        if hi > 512.0:
            raise RuntimeError("no firing found along the slow eigenplane")
    for _ in range(44):
        mid = 0.5 * (lo + hi)
        if _fires(system, fp.x0 + mid * d):
            hi = mid
        else:
            lo = mid
    x_b = fp.x0 + 0.5 * (lo + hi) * d

    traj, _ = integrate(system, x_b, (0.0, settle), None, OPTS_MANIFOLD)
    # period estimate from maxima of V_1 over the tail of the settle run
    tt = np.linspace(settle * 0.2, settle, 4000)
    v1 = traj.state_at(tt)[:, 0]
    peaks = [
        tt[i]
        for i in range(1, len(tt) - 1)
        if v1[i] >= v1[i - 1] and v1[i] > v1[i + 1]
    ]
    if len(peaks) < 2:
        raise RuntimeError("could not estimate the unstable-orbit period")
    T_est = float(np.mean(np.diff(peaks)))
    po = find_periodic_orbit(
        system,
        traj.states[-1],
        T_est,
        shoot_tol=1e-9,
        segments=segments,
        retain=retain,
        opts=OPTS_SHOOT,
    )
    if po.n_unstable != 1:
        raise RuntimeError(
            f"expected one unstable Floquet mode, found {po.n_unstable} "
            f"(exponents {po.exponents[:3]})"
        )
    return po


def locate_circadian_orbit(
    system: DynamicalSystem,
    settle: float = 500.0,
    retain: int = 3,
) -> PeriodicOrbitData:
    traj, _ = integrate(
        system, circadian_start_state(), (0.0, settle), None, OPTS_BULK
    )
    tt = np.linspace(settle * 0.5, settle, 4000)
    mp = traj.state_at(tt)[:, 0]
    peaks = [
        tt[i]
        for i in range(1, len(tt) - 1)
        if mp[i] >= mp[i - 1] and mp[i] > mp[i + 1]
    ]
    if len(peaks) < 3:
        raise RuntimeError("circadian relaxation shows no oscillation")
    T_est = float(np.mean(np.diff(peaks)))
    return find_periodic_orbit(
        system, traj.states[-1], T_est, shoot_tol=1e-10, retain=retain,
        opts=OPTS_SHOOT,
    )


def locate_circadian_fixed_point(
    system: DynamicalSystem, orbit: PeriodicOrbitData
) -> FixedPointData:
    guess = orbit.grid_x[:-1].mean(axis=0)
    return find_fixed_point(system, guess, newton_tol=1e-12)
