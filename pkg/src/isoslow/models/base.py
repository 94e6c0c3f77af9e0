"""Generic autonomous ODE with additive scalar input: xdot = F(x) + alpha*u(t)."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class DynamicalSystem:
    """Immutable system definition.

    ``rhs`` and ``jac`` are the hot kernels (numba-compiled unless disabled)
    with signatures ``rhs(t, x, u, pars) -> xdot`` and
    ``jac(t, x, pars) -> (N, N)``.  Both are pure; instances are safe to
    share across threads/processes.
    """

    name: str
    dim: int
    pars: np.ndarray
    rhs: Callable
    jac: Callable
    input_coupling: np.ndarray
    time_unit: str
    state_labels: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    def f(self, x: np.ndarray, u: float = 0.0) -> np.ndarray:
        return self.rhs(0.0, np.asarray(x, dtype=float), float(u), self.pars)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return self.jac(0.0, np.asarray(x, dtype=float), self.pars)

    def jacobian_fd(self, x: np.ndarray) -> np.ndarray:
        """Central finite-difference Jacobian, h_i = sqrt(eps)*max(1, |x_i|)."""
        x = np.asarray(x, dtype=float)
        n = self.dim
        J = np.empty((n, n))
        h0 = np.sqrt(np.finfo(float).eps)
        for i in range(n):
            h = h0 * max(1.0, abs(x[i]))
            xp = x.copy()
            xm = x.copy()
            xp[i] += h
            xm[i] -= h
            J[:, i] = (self.f(xp) - self.f(xm)) / (2.0 * h)
        return J


def load_param_overrides(path: str | Path | None) -> dict:
    """Read a JSON config file of parameter overrides (missing path -> {})."""
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"parameter config {path} must hold a JSON object")
    return data
