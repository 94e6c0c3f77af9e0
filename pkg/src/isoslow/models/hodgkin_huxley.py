"""Four electrotonically coupled Hodgkin-Huxley neurons (16 states).

State ordering is neuron-major: (V_1, n_1, m_1, h_1, V_2, ..., h_4).
Voltages in mV, time in ms.  The transmembrane current input u(t) enters the
voltage equations of neurons 1 and 2 only.

The classic rate constants alpha_n and alpha_m have removable singularities
at V = 10 and V = 25; both are evaluated through the series of
s/(exp(s)-1) once |s| < 1e-4 so the kernels stay smooth there.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._accel import maybe_njit
from .base import DynamicalSystem


def _default_baseline() -> tuple[float, float, float, float]:
    return tuple(-4.318 + 0.75 * j for j in (1, 2, 3, 4))


@dataclass(frozen=True)
class HHParams:
    c_m: float = 1.0
    g_na: float = 120.0
    g_k: float = 36.0
    g_l: float = 1.0
    v_na: float = 115.0
    v_k: float = -12.0
    v_l: float = 10.599
    g_c: float = 1.5
    baseline_current: tuple[float, float, float, float] = field(
        default_factory=_default_baseline
    )


@maybe_njit(cache=True)
def _expm1_ratio(s):
    # s / (exp(s) - 1), series for small |s|
    if abs(s) < 1e-4:
        return 1.0 - s / 2.0 + s * s / 12.0
    return s / np.expm1(s)


@maybe_njit(cache=True)
def _expm1_ratio_d(s):
    # d/ds of s/(exp(s)-1)
    if abs(s) < 1e-4:
        return -0.5 + s / 6.0
    e = np.expm1(s)
    return (e - s * (e + 1.0)) / (e * e)


@maybe_njit(cache=True)
def hh_rates(v):
    """(a_n, b_n, a_m, b_m, a_h, b_h) at transmembrane voltage v."""
    a_n = 0.1 * _expm1_ratio((10.0 - v) / 10.0)
    b_n = 0.125 * np.exp(-v / 80.0)
    a_m = _expm1_ratio((25.0 - v) / 10.0)
    b_m = 4.0 * np.exp(-v / 18.0)
    a_h = 0.07 * np.exp(-v / 20.0)
    b_h = 1.0 / (np.exp((30.0 - v) / 10.0) + 1.0)
    return a_n, b_n, a_m, b_m, a_h, b_h


@maybe_njit(cache=True)
def _hh_rates_d(v):
    """Voltage derivatives of the six rate functions."""
    da_n = -0.01 * _expm1_ratio_d((10.0 - v) / 10.0)
    db_n = -0.125 / 80.0 * np.exp(-v / 80.0)
    da_m = -0.1 * _expm1_ratio_d((25.0 - v) / 10.0)
    db_m = -4.0 / 18.0 * np.exp(-v / 18.0)
    da_h = -0.07 / 20.0 * np.exp(-v / 20.0)
    e = np.exp((30.0 - v) / 10.0)
    db_h = 0.1 * e / ((e + 1.0) * (e + 1.0))
    return da_n, db_n, da_m, db_m, da_h, db_h


@maybe_njit(cache=True)
def hh_rhs(t, x, u, p):
    c_m, g_na, g_k, g_l = p[0], p[1], p[2], p[3]
    v_na, v_k, v_l, g_c = p[4], p[5], p[6], p[7]
    out = np.empty(16)
    vbar = 0.25 * (x[0] + x[4] + x[8] + x[12])
    for j in range(4):
        o = 4 * j
        v, n, m, h = x[o], x[o + 1], x[o + 2], x[o + 3]
        a_n, b_n, a_m, b_m, a_h, b_h = hh_rates(v)
        i_ion = (
            g_na * m ** 3 * h * (v - v_na)
            + g_k * n ** 4 * (v - v_k)
            + g_l * (v - v_l)
        )
        uj = u if j < 2 else 0.0
        out[o] = (-i_ion - g_c * (v - vbar) + p[8 + j] + uj) / c_m
        out[o + 1] = a_n * (1.0 - n) - b_n * n
        out[o + 2] = a_m * (1.0 - m) - b_m * m
        out[o + 3] = a_h * (1.0 - h) - b_h * h
    return out


@maybe_njit(cache=True)
def hh_jac(t, x, p):
    c_m, g_na, g_k, g_l = p[0], p[1], p[2], p[3]
    v_na, v_k, g_c = p[4], p[5], p[7]
    J = np.zeros((16, 16))
    for j in range(4):
        o = 4 * j
        v, n, m, h = x[o], x[o + 1], x[o + 2], x[o + 3]
        a_n, b_n, a_m, b_m, a_h, b_h = hh_rates(v)
        da_n, db_n, da_m, db_m, da_h, db_h = _hh_rates_d(v)
        # voltage row
        dv = -(g_na * m ** 3 * h + g_k * n ** 4 + g_l) / c_m
        for k in range(4):
            J[o, 4 * k] = g_c * 0.25 / c_m
        J[o, o] = dv - g_c * 0.75 / c_m
        J[o, o + 1] = -4.0 * g_k * n ** 3 * (v - v_k) / c_m
        J[o, o + 2] = -3.0 * g_na * m ** 2 * h * (v - v_na) / c_m
        J[o, o + 3] = -g_na * m ** 3 * (v - v_na) / c_m
        # gating rows
        J[o + 1, o] = da_n * (1.0 - n) - db_n * n
        J[o + 1, o + 1] = -(a_n + b_n)
        J[o + 2, o] = da_m * (1.0 - m) - db_m * m
        J[o + 2, o + 2] = -(a_m + b_m)
        J[o + 3, o] = da_h * (1.0 - h) - db_h * h
        J[o + 3, o + 3] = -(a_h + b_h)
    return J


def gating_steady_state(v: float) -> tuple[float, float, float]:
    """(n_inf, m_inf, h_inf) at voltage v."""
    a_n, b_n, a_m, b_m, a_h, b_h = hh_rates(v)
    return a_n / (a_n + b_n), a_m / (a_m + b_m), a_h / (a_h + b_h)


def build_hh(params: HHParams | None = None, **overrides) -> DynamicalSystem:
    if params is None:
        params = HHParams(**overrides)
    elif overrides:
        raise TypeError("pass either params or keyword overrides, not both")
    pars = np.array(
        [
            params.c_m,
            params.g_na,
            params.g_k,
            params.g_l,
            params.v_na,
            params.v_k,
            params.v_l,
            params.g_c,
            *params.baseline_current,
        ],
        dtype=float,
    )
    alpha = np.zeros(16)
    alpha[0] = 1.0
    alpha[4] = 1.0
    labels = tuple(
        f"{name}{j}" for j in range(1, 5) for name in ("V", "n", "m", "h")
    )
    return DynamicalSystem(
        name="hh",
        dim=16,
        pars=pars,
        rhs=hh_rhs,
        jac=hh_jac,
        input_coupling=alpha,
        time_unit="ms",
        state_labels=labels,
        meta={"params": params},
    )


def hh_rest_guess(system: DynamicalSystem) -> np.ndarray:
    """Crude quiescent state: all neurons at V = 0 with steady-state gating."""
    n0, m0, h0 = gating_steady_state(0.0)
    return np.array([0.0, n0, m0, h0] * 4)
