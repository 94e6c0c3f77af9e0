"""Deterministic ODE integration: state, variational and adjoint flows.

Adaptive embedded RK 5(4) (Dormand-Prince) with cubic-Hermite dense output
and bisection event location, plus a fixed-step RK4.  Integrations are
single-use calls over immutable systems; concurrent use is safe.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from ._accel import USING_NUMBA, is_dispatcher, maybe_njit, py_func
from ._stepping import (
    dense_eval,
    rk4_segment,
    rk4_segment_py,
    rk45_segment,
    rk45_segment_py,
    u_standard,
)
from .models.base import DynamicalSystem

_SEGMENT = 4096
_EVENT_TIME_TOL = 1e-10


class IntegrationError(RuntimeError):
    def __init__(self, message, last_t=None, component=None):
        super().__init__(message)
        self.last_t = last_t
        self.component = component


class AdjointAccuracyError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorOptions:
    method: str = "rk45"  # "rk45" or "rk4"
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = np.inf
    first_step: float | None = None
    fixed_step: float | None = None
    max_steps: int = 20_000_000

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.method not in ("rk45", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")


# profile used for manifold/adjoint work (products like I.g must hold ~1e-6)
OPTS_MANIFOLD = IntegratorOptions(rel_tol=1e-9, abs_tol=1e-11)
# profile for bulk closed-loop simulation
OPTS_BULK = IntegratorOptions(rel_tol=1e-6, abs_tol=1e-9)


@dataclass(frozen=True)
class InputSignal:
    """u(t) = amp*sin(freq*t + phase) + const; the jitted path's input form."""

    amp: float = 0.0
    freq: float = 0.0
    phase: float = 0.0
    const: float = 0.0

    @classmethod
    def zero(cls) -> "InputSignal":
        return cls()

    @classmethod
    def constant(cls, c: float) -> "InputSignal":
        return cls(const=float(c))

    @classmethod
    def sine(cls, amp: float, freq: float, phase: float = 0.0) -> "InputSignal":
        return cls(amp=float(amp), freq=float(freq), phase=float(phase))

    def packed(self) -> np.ndarray:
        return np.array([self.amp, self.freq, self.phase, self.const])

    def __call__(self, t):
        return self.amp * np.sin(self.freq * t + self.phase) + self.const


@dataclass(frozen=True)
class EventSpec:
    fn: Callable[[float, np.ndarray], float]
    direction: int = 0  # +1 rising, -1 falling, 0 any
    terminal: bool = False


@dataclass(frozen=True)
class EventRecord:
    index: int
    t: float
    state: np.ndarray


class Trajectory:
    """Time-stamped samples with cubic-Hermite dense interpolation.

    ``times`` are strictly increasing for forward runs, strictly decreasing
    for backward runs; derivative samples at the nodes carry the dense
    coefficients.
    """

    def __init__(self, times: np.ndarray, states: np.ndarray, derivs: np.ndarray):
        self.times = np.asarray(times, dtype=float)
        self.states = np.asarray(states, dtype=float)
        self.derivs = np.asarray(derivs, dtype=float)
        if self.times.ndim != 1 or self.states.shape != (len(self.times), self.dim) \
                or self.derivs.shape != self.states.shape:
            raise ValueError("inconsistent trajectory arrays")
        d = np.diff(self.times)
        if len(d) and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("times must be strictly monotone")

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def direction(self) -> int:
        if len(self.times) < 2:
            return 1
        return 1 if self.times[1] > self.times[0] else -1

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return len(self.times)

    def _ordered(self):
        if self.direction > 0:
            return self.times, self.states, self.derivs
        cached = getattr(self, "_ordered_cache", None)
        if cached is None:
            cached = (
                self.times[::-1].copy(),
                self.states[::-1].copy(),
                self.derivs[::-1].copy(),
            )
            self._ordered_cache = cached
        return cached

    def state_at(self, t):
        tt, xx, ff = self._ordered()
        if np.isscalar(t):
            return dense_eval(tt, xx, ff, float(t))
        return np.array([dense_eval(tt, xx, ff, float(ti)) for ti in np.asarray(t)])

    def reversed(self) -> "Trajectory":
        return Trajectory(self.times[::-1].copy(), self.states[::-1].copy(),
                          self.derivs[::-1].copy())

    def to_csv(self, path) -> None:
        from .fileio import write_csv

        header = ["t"] + [f"x_{i + 1}" for i in range(self.dim)]
        cols = [self.times] + [self.states[:, i] for i in range(self.dim)]
        write_csv(path, header, cols)

    @classmethod
    def from_csv(cls, path, system: DynamicalSystem) -> "Trajectory":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        times = data[:, 0]
        states = data[:, 1:]
        derivs = np.array([system.f(x) for x in states])
        return cls(times, states, derivs)

    def to_json_obj(self) -> dict:
        return {
            "times": self.times.tolist(),
            "states": self.states.tolist(),
            "dim": self.dim,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_obj(), fh)


def _u_parts(input_signal):
    """(u_fn, upars, jit_ok) for the given input specification."""
    if input_signal is None:
        return u_standard, np.zeros(4), True
    if isinstance(input_signal, InputSignal):
        return u_standard, input_signal.packed(), True
    if callable(input_signal):
        fn = input_signal

        def u_callable(t, up):
            return float(fn(t))

        return u_callable, np.zeros(4), False
    raise TypeError(f"unsupported input specification {input_signal!r}")


def _pick_cores(method: str, rhs, jit_input: bool):
    jit = USING_NUMBA and is_dispatcher(rhs) and jit_input
    if method == "rk45":
        return (rk45_segment if jit else rk45_segment_py), jit
    return (rk4_segment if jit else rk4_segment_py), jit


def _initial_step(f0, x0, t_span, opts):
    span = t_span[1] - t_span[0]
    s = 1.0 if span >= 0 else -1.0
    if opts.method == "rk4":
        h = opts.fixed_step if opts.fixed_step else abs(span) / 1000.0
        return s * abs(h)
    if opts.first_step:
        return s * abs(opts.first_step)
    scale = opts.abs_tol + opts.rel_tol * float(np.max(np.abs(x0)))
    fmax = float(np.max(np.abs(f0)))
    h = abs(span) / 100.0
    if fmax > 0.0:
        h = min(h, 0.1 * (scale / fmax) ** 0.5, abs(span))
    return s * max(h, 1e-12)


def _locate_event(ev, ta, tb, hermite_args, ga, gb):
    """Bisection (to 1e-10 time tolerance) then secant polish on dense output."""
    tt, xx, ff = hermite_args

    def g(t):
        return ev.fn(t, dense_eval(tt, xx, ff, t))

    a, b = ta, tb
    fa, fb = ga, gb
    while abs(b - a) > _EVENT_TIME_TOL:
        m = 0.5 * (a + b)
        fm = g(m)
        if (fa < 0) == (fm < 0):
            a, fa = m, fm
        else:
            b, fb = m, fm
    # secant polish for sharp event values
    t0, t1 = a, b
    f0, f1 = fa, fb
    for _ in range(8):
        if f1 == f0:
            break
        t2 = t1 - f1 * (t1 - t0) / (f1 - f0)
        if not (min(a, b) - _EVENT_TIME_TOL <= t2 <= max(a, b) + _EVENT_TIME_TOL):
            break
        t0, f0 = t1, f1
        t1, f1 = t2, g(t2)
    tstar = t1 if abs(f1) < abs(f0) else t0
    return tstar, dense_eval(tt, xx, ff, tstar)


def _event_sign_ok(ev, ga, gb):
    up = ga < 0.0 <= gb
    down = ga > 0.0 >= gb
    if ev.direction > 0:
        return up
    if ev.direction < 0:
        return down
    return up or down


def integrate(
    system: DynamicalSystem,
    x0: np.ndarray,
    t_span: tuple[float, float],
    input=None,
    opts: IntegratorOptions | None = None,
    events: Sequence[EventSpec] = (),
    _rhs=None,
    _pars=None,
):
    """Flow x' = F(x) + alpha*u(t) over t_span; returns (Trajectory, events).

    ``input`` is None, an InputSignal, or any callable t -> u (the latter
    runs on the uncompiled path).  Terminal events truncate the span.
    """
    opts = opts or IntegratorOptions()
    rhs = _rhs if _rhs is not None else system.rhs
    pars = _pars if _pars is not None else system.pars
    x0 = np.asarray(x0, dtype=float)
    t0, t1 = float(t_span[0]), float(t_span[1])
    u_fn, upars, jit_input = _u_parts(input)
    core, jit = _pick_cores(opts.method, rhs, jit_input)
    rhs_use = rhs if jit else py_func(rhs)
    u_use = u_fn if jit or not is_dispatcher(u_fn) else py_func(u_fn)

    x = x0.copy()
    f = np.asarray(rhs_use(t0, x, float(u_use(t0, upars)), pars), dtype=float)
    if not np.all(np.isfinite(f)):
        bad = int(np.argmax(~np.isfinite(f)))
        raise IntegrationError(
            f"non-finite derivative at initial state (component {bad})",
            last_t=t0,
            component=bad,
        )
    n = len(x)
    if t1 == t0:
        traj = Trajectory(np.array([t0]), x[None, :].copy(), f[None, :].copy())
        return traj, []

    h = _initial_step(f, x0, (t0, t1), opts)
    ts = [np.array([t0])]
    xs = [x[None, :].copy()]
    fs = [f[None, :].copy()]
    records: list[EventRecord] = []
    g_prev = [ev.fn(t0, x) for ev in events]

    buf_t = np.empty(_SEGMENT)
    buf_x = np.empty((_SEGMENT, n))
    buf_f = np.empty((_SEGMENT, n))
    t = t0
    total = 0
    terminal_hit = False
    while True:
        nw, t, h, status = core(
            rhs_use, u_use, pars, upars, t, x, f, h, t1,
            opts.rel_tol, opts.abs_tol, opts.max_step, buf_t, buf_x, buf_f,
        )
        total += nw
        seg_t = buf_t[:nw].copy()
        seg_x = buf_x[:nw].copy()
        seg_f = buf_f[:nw].copy()

        if events and nw:
            # assemble local dense data including the previous node
            loc_t = np.concatenate(([ts[-1][-1]], seg_t))
            loc_x = np.vstack((xs[-1][-1], seg_x))
            loc_f = np.vstack((fs[-1][-1], seg_f))
            if loc_t[0] > loc_t[-1]:
                hAt = (loc_t[::-1].copy(), loc_x[::-1].copy(), loc_f[::-1].copy())
            else:
                hAt = (loc_t, loc_x, loc_f)
            cut = None
            for i in range(nw):
                for j, ev in enumerate(events):
                    gb = ev.fn(loc_t[i + 1], loc_x[i + 1])
                    ga = g_prev[j]
                    if _event_sign_ok(ev, ga, gb):
                        tstar, xstar = _locate_event(
                            ev, loc_t[i], loc_t[i + 1], hAt, ga, gb
                        )
                        records.append(EventRecord(j, float(tstar), xstar))
                        if ev.terminal:
                            cut = (i, tstar, xstar)
                            break
                    g_prev[j] = gb
                if cut is not None:
                    break
            if cut is not None:
                i, tstar, xstar = cut
                seg_t = np.concatenate((seg_t[:i], [tstar]))
                fstar = np.asarray(
                    rhs_use(tstar, xstar, float(u_use(tstar, upars)), pars),
                    dtype=float,
                )
                seg_x = np.vstack((seg_x[:i], xstar))
                seg_f = np.vstack((seg_f[:i], fstar))
                terminal_hit = True
        if nw:
            ts.append(seg_t)
            xs.append(seg_x)
            fs.append(seg_f)
        if terminal_hit or status == 0:
            break
        if status == 2:
            raise IntegrationError(
                f"step size underflow at t={t!r}", last_t=t
            )
        if status == 3:
            bad = int(np.argmax(~np.isfinite(x))) if not np.all(np.isfinite(x)) else -1
            raise IntegrationError(
                f"non-finite state during integration near t={t!r} (component {bad})",
                last_t=t,
                component=bad,
            )
        if total > opts.max_steps:
            raise IntegrationError(f"exceeded max_steps={opts.max_steps}", last_t=t)

    traj = Trajectory(np.concatenate(ts), np.vstack(xs), np.vstack(fs))
    return traj, records


@lru_cache(maxsize=None)
def _variational_rhs_for(rhs_fn, jac_fn, n):
    @maybe_njit
    def vrhs(t, y, u, pars):
        x = y[:n]
        phi = y[n:].reshape(n, n)
        out = np.empty_like(y)
        out[:n] = rhs_fn(t, x, u, pars)
        out[n:] = (jac_fn(t, x, pars) @ phi).ravel()
        return out

    return vrhs


def integrate_variational(
    system: DynamicalSystem,
    x0: np.ndarray,
    t_span: tuple[float, float],
    opts: IntegratorOptions | None = None,
    return_aug: bool = False,
):
    """Co-integrate x' = F(x), Phi' = J(x(t)) Phi with Phi(t0) = Id.

    Returns (state trajectory, Phi(t1)); with ``return_aug`` also the raw
    augmented trajectory (states = [x, Phi.ravel()]), whose dense output
    interpolates Phi(t).
    """
    n = system.dim
    x0 = np.asarray(x0, dtype=float)
    y0 = np.concatenate((x0, np.eye(n).ravel()))
    vrhs = _variational_rhs_for(system.rhs, system.jac, n)
    traj, _ = integrate(system, y0, t_span, None, opts, _rhs=vrhs, _pars=system.pars)
    states = traj.states[:, :n]
    derivs = traj.derivs[:, :n]
    state_traj = Trajectory(traj.times, states, derivs)
    phi_end = traj.states[-1, n:].reshape(n, n).copy()
    if return_aug:
        return state_traj, phi_end, traj
    return state_traj, phi_end


@lru_cache(maxsize=None)
def _linear_flow_rhs_for(jac_fn, n, npars):
    """RHS for gradient/dual vectors carried along a frozen base trajectory.

    The base trajectory and the complex shift are packed into ``pars`` after
    the model constants:
    [model pars | re(lam), im(lam), mode, K | times(K) | states(K*n) | derivs(K*n)]
    mode 0: adjoint   Idot = -(J^T - lam) I      (backward runs)
    mode 1: dual      gdot =  (J   - lam) g      (forward runs)
    State y is the 2n real (Re, Im) split.
    """

    @maybe_njit
    def lrhs(t, y, u, pars):
        sig = pars[npars]
        mu = pars[npars + 1]
        mode = pars[npars + 2]
        K = int(pars[npars + 3])
        off = npars + 4
        times = pars[off:off + K]
        states = pars[off + K:off + K + K * n].reshape(K, n)
        derivs = pars[off + K + K * n:off + K + 2 * K * n].reshape(K, n)
        x = dense_eval(times, states, derivs, t)
        J = jac_fn(t, x, pars[:npars])
        a = y[:n]
        b = y[n:]
        out = np.empty_like(y)
        if mode < 0.5:
            ja = J.T @ a
            jb = J.T @ b
            out[:n] = -ja + sig * a - mu * b
            out[n:] = -jb + sig * b + mu * a
        else:
            ja = J @ a
            jb = J @ b
            out[:n] = ja - sig * a + mu * b
            out[n:] = jb - sig * b - mu * a
        return out

    return lrhs


def _pack_linear_pars(system, base: Trajectory, lam: complex, mode: float):
    tt, xx, ff = base._ordered()
    K = len(tt)
    return np.concatenate(
        (
            system.pars,
            [lam.real, lam.imag, mode, float(K)],
            tt,
            xx.ravel(),
            ff.ravel(),
        )
    )


def _linear_flow(system, base, cond, lam, mode, opts, t_from, t_to):
    n = system.dim
    cond = np.asarray(cond, dtype=complex)
    lrhs = _linear_flow_rhs_for(system.jac, n, len(system.pars))
    pars = _pack_linear_pars(system, base, complex(lam), mode)
    y0 = np.concatenate((cond.real, cond.imag))
    traj, _ = integrate(system, y0, (t_from, t_to), None, opts, _rhs=lrhs, _pars=pars)
    return traj


def _sample_complex(traj: Trajectory, ts: np.ndarray, n: int) -> np.ndarray:
    vals = traj.state_at(ts)
    return vals[:, :n] + 1j * vals[:, n:]


def integrate_adjoint(
    system: DynamicalSystem,
    base: Trajectory,
    terminal_condition: np.ndarray,
    shift: complex = 0.0,
    opts: IntegratorOptions | None = None,
    check: bool = False,
    check_rel_tol: float = 1e-6,
) -> np.ndarray:
    """Solve Idot = -(J^T(x(t)) - shift*Id) I backward along ``base``.

    J is evaluated on the dense interpolation of the stored forward
    trajectory, so the adjoint sees exactly the forward path.  Returns
    complex samples aligned to base.times.  shift=0 gives the
    phase-gradient equation Zdot = -J^T Z.
    """
    if base.direction < 0:
        raise ValueError("base trajectory must run forward in time")
    opts = opts or OPTS_MANIFOLD
    n = system.dim
    traj = _linear_flow(system, base, terminal_condition, shift, 0.0, opts,
                        base.t1, base.t0)
    out = _sample_complex(traj, base.times, n)
    if check:
        half = IntegratorOptions(
            method=opts.method,
            rel_tol=opts.rel_tol,
            abs_tol=opts.abs_tol,
            max_step=(min(opts.max_step, np.max(np.abs(np.diff(base.times)))) / 2.0),
        )
        traj2 = _linear_flow(system, base, terminal_condition, shift, 0.0, half,
                             base.t1, base.t0)
        out2 = _sample_complex(traj2, base.times, n)
        scale = np.max(np.abs(out)) or 1.0
        if np.max(np.abs(out - out2)) / scale > check_rel_tol:
            raise AdjointAccuracyError(
                "base trajectory too coarse for requested adjoint accuracy"
            )
    return out


def integrate_dual(
    system: DynamicalSystem,
    base: Trajectory,
    initial_condition: np.ndarray,
    shift: complex = 0.0,
    opts: IntegratorOptions | None = None,
) -> np.ndarray:
    """Solve gdot = (J(x(t)) - shift*Id) g forward along ``base``.

    Returns complex samples aligned to base.times.
    """
    if base.direction < 0:
        raise ValueError("base trajectory must run forward in time")
    opts = opts or OPTS_MANIFOLD
    n = system.dim
    traj = _linear_flow(system, base, initial_condition, shift, 1.0, opts,
                        base.t0, base.t1)
    return _sample_complex(traj, base.times, n)
