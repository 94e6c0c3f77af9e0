"""Stepper cores shared by the jitted and pure-numpy integration paths.

Every function here is numba-compatible; ``maybe_njit`` compiles them unless
ISOSLOW_DISABLE_NUMBA is set.  Cores receive the right-hand side and the
input signal as function arguments, so one source serves every model.  The
cores write accepted nodes (t, x, f) into caller-provided buffers and return
when the span is done, the buffer is full, or the step fails; the
orchestration (events, buffer growth, error reporting) lives in
``odeint``.

Status codes: 0 span complete, 1 buffer full, 2 step underflow,
3 non-finite state.
"""
from __future__ import annotations

import numpy as np

from ._accel import maybe_njit

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 0.2, 0.3, 0.8, 8.0 / 9.0
_A21 = 0.2
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
)
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = (
    35.0 / 384.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
)
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


@maybe_njit(cache=True)
def u_standard(t, up):
    """amp*sin(freq*t + phase) + const."""
    return up[0] * np.sin(up[1] * t + up[2]) + up[3]


@maybe_njit(cache=True)
def dense_eval(times, states, derivs, t):
    """Cubic Hermite dense-output evaluation; times strictly increasing.

    Exact (bitwise) at stored nodes.
    """
    k = times.shape[0]
    if t <= times[0]:
        i = 0
    elif t >= times[k - 1]:
        i = k - 2
    else:
        i = int(np.searchsorted(times, t)) - 1
        if i < 0:
            i = 0
        elif i > k - 2:
            i = k - 2
    t0 = times[i]
    t1 = times[i + 1]
    h = t1 - t0
    th = (t - t0) / h
    h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th)
    h10 = th * (1.0 - th) * (1.0 - th)
    h01 = th * th * (3.0 - 2.0 * th)
    h11 = th * th * (th - 1.0)
    return (
        h00 * states[i]
        + (h10 * h) * derivs[i]
        + h01 * states[i + 1]
        + (h11 * h) * derivs[i + 1]
    )


def _rk45_segment_impl(
    rhs, u_fn, pars, upars, t, x, f, h, t_end,
    rtol, atol, max_step, buf_t, buf_x, buf_f,
):
    n = x.shape[0]
    cap = buf_t.shape[0]
    nw = 0
    s = 1.0 if t_end >= t else -1.0
    while True:
        if s * (t - t_end) >= 0.0:
            return nw, t, h, 0
        if nw >= cap:
            return nw, t, h, 1
        if abs(h) > max_step:
            h = s * max_step
        if s * (t + h - t_end) > 0.0:
            h = t_end - t
        if abs(h) <= 2.2e-15 * max(1.0, abs(t)):
            return nw, t, h, 2

        k1 = f
        xs = x + (h * _A21) * k1
        k2 = rhs(t + _C2 * h, xs, u_fn(t + _C2 * h, upars), pars)
        xs = x + h * (_A31 * k1 + _A32 * k2)
        k3 = rhs(t + _C3 * h, xs, u_fn(t + _C3 * h, upars), pars)
        xs = x + h * (_A41 * k1 + _A42 * k2 + _A43 * k3)
        k4 = rhs(t + _C4 * h, xs, u_fn(t + _C4 * h, upars), pars)
        xs = x + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4)
        k5 = rhs(t + _C5 * h, xs, u_fn(t + _C5 * h, upars), pars)
        xs = x + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5)
        k6 = rhs(t + h, xs, u_fn(t + h, upars), pars)
        x_new = x + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        k7 = rhs(t + h, x_new, u_fn(t + h, upars), pars)

        err = 0.0
        finite = True
        for i in range(n):
            e = h * (
                _E1 * k1[i]
                + _E3 * k3[i]
                + _E4 * k4[i]
                + _E5 * k5[i]
                + _E6 * k6[i]
                + _E7 * k7[i]
            )
            sc = atol + rtol * max(abs(x[i]), abs(x_new[i]))
            r = e / sc
            err += r * r
            if not np.isfinite(x_new[i]):
                finite = False
        err = np.sqrt(err / n)
        if not finite or not np.isfinite(err):
            # overflow in a trial step: hard rejection
            h = h * _MIN_FACTOR
            continue

        if err <= 1.0:
            t = t + h
            for i in range(n):
                x[i] = x_new[i]
                f[i] = k7[i]
            buf_t[nw] = t
            for i in range(n):
                buf_x[nw, i] = x[i]
                buf_f[nw, i] = f[i]
            nw += 1
            if err == 0.0:
                fac = _MAX_FACTOR
            else:
                fac = min(_MAX_FACTOR, _SAFETY * err ** -0.2)
            h = h * max(_MIN_FACTOR, fac)
        else:
            h = h * max(_MIN_FACTOR, _SAFETY * err ** -0.2)


def _rk4_segment_impl(
    rhs, u_fn, pars, upars, t, x, f, h, t_end,
    rtol, atol, max_step, buf_t, buf_x, buf_f,
):
    n = x.shape[0]
    cap = buf_t.shape[0]
    nw = 0
    s = 1.0 if t_end >= t else -1.0
    if abs(h) > max_step:
        h = s * max_step
    while True:
        if s * (t - t_end) >= 0.0:
            return nw, t, h, 0
        if nw >= cap:
            return nw, t, h, 1
        hs = h
        if s * (t + hs - t_end) > 0.0:
            hs = t_end - t
        if abs(hs) <= 2.2e-15 * max(1.0, abs(t)):
            return nw, t, h, 2
        k1 = f
        k2 = rhs(t + 0.5 * hs, x + (0.5 * hs) * k1, u_fn(t + 0.5 * hs, upars), pars)
        k3 = rhs(t + 0.5 * hs, x + (0.5 * hs) * k2, u_fn(t + 0.5 * hs, upars), pars)
        k4 = rhs(t + hs, x + hs * k3, u_fn(t + hs, upars), pars)
        x_new = x + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for i in range(n):
            if not np.isfinite(x_new[i]):
                return nw, t, h, 3
        t = t + hs
        fn = rhs(t, x_new, u_fn(t, upars), pars)
        for i in range(n):
            x[i] = x_new[i]
            f[i] = fn[i]
        buf_t[nw] = t
        for i in range(n):
            buf_x[nw, i] = x[i]
            buf_f[nw, i] = f[i]
        nw += 1


rk45_segment = maybe_njit(_rk45_segment_impl)
rk4_segment = maybe_njit(_rk4_segment_impl)
# uncompiled twins: used for python-callable right-hand sides and as the
# pure-numpy fallback
rk45_segment_py = _rk45_segment_impl
rk4_segment_py = _rk4_segment_impl
