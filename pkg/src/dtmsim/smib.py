"""Single machine against an infinite bus, classical model.

``delta' = omega_s omega`` and ``2H omega' = P_m - P_max sin(delta) - D omega``.
Its series solution uses the same transform rules as the multi-machine
builder, with the electrical power reduced to ``P_max`` times the sin-series
of the rotor angle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dt_core import Series, TrigPair, horner, trig_extend
from .model.machine import OMEGA_S_60HZ
from .reference_rk4 import rk4_integrate


@dataclass(frozen=True)
class SMIBSystem:
    H: float = 3.0
    D: float = 3.0
    P_max: float = 1.7
    P_m: float = 0.44
    omega_s: float = OMEGA_S_60HZ
    delta0: float = 0.26
    omega0: float = 0.002

    def __post_init__(self) -> None:
        if not self.H > 0 or self.D < 0:
            raise ValueError("need H > 0 and D >= 0")

    @property
    def initial(self) -> np.ndarray:
        return np.array([self.delta0, self.omega0])

    def with_damping(self, D: float) -> "SMIBSystem":
        return replace(self, D=D)

    def rhs(self, x: np.ndarray) -> np.ndarray:
        delta, omega = x
        return np.array([
            self.omega_s * omega,
            (self.P_m - self.P_max * math.sin(delta) - self.D * omega) / (2.0 * self.H),
        ])

    def energy(self, delta, omega):
        """First integral of the undamped system, ``H w_s w^2 - P_m delta - P_max cos(delta)``."""
        return self.H * self.omega_s * np.square(omega) - self.P_m * delta - self.P_max * np.cos(delta)


@dataclass(frozen=True)
class SMIBWindow:
    delta: Series
    omega: Series
    trig: TrigPair

    @property
    def order(self) -> int:
        return self.delta.order

    def states_at(self, t) -> np.ndarray:
        """``[delta, omega]`` at one offset, or shape ``(T, 2)`` for an array of offsets."""
        coeffs = np.stack([self.delta.coeffs, self.omega.coeffs], axis=-1)
        return horner(coeffs, t)


def smib_window(system: SMIBSystem, K: int, x0=None) -> SMIBWindow:
    """Order-``K`` series of ``delta`` and ``omega`` starting from ``x0``."""
    if K < 1:
        raise ValueError("order K must be >= 1")
    d0, w0 = system.initial if x0 is None else x0
    delta = np.zeros(K + 1)
    omega = np.zeros(K + 1)
    s = np.zeros(K + 1)
    c = np.zeros(K + 1)
    delta[0], omega[0] = d0, w0
    s[0], c[0] = math.sin(d0), math.cos(d0)
    for k in range(K):
        if k > 0:
            s[k], c[k] = trig_extend(Series(delta[: k + 1]), TrigPair(Series(s[:k]), Series(c[:k])), k)
        drive = system.P_m if k == 0 else 0.0
        delta[k + 1] = system.omega_s * omega[k] / (k + 1)
        omega[k + 1] = (drive - system.P_max * s[k] - system.D * omega[k]) / (2.0 * system.H * (k + 1))
    s[K], c[K] = trig_extend(Series(delta), TrigPair(Series(s[:K]), Series(c[:K])), K)
    return SMIBWindow(Series(delta), Series(omega), TrigPair(Series(s), Series(c)))


def smib_reference(system: SMIBSystem, step: float, n_steps: int, x0=None) -> np.ndarray:
    """RK4 states ``(n_steps + 1, 2)`` on the grid ``i * step``."""
    x0 = system.initial if x0 is None else np.asarray(x0, dtype=float)
    return rk4_integrate(system.rhs, x0, step, n_steps)


def accurate_window(system: SMIBSystem, K: int, tol: float = 1e-5, step: float = 1.0 / 1200.0,
                    horizon: float = 0.6, reference: np.ndarray | None = None) -> float:
    """Longest offset on the ``step`` grid before ``|delta_series - delta_rk4|`` first exceeds ``tol``."""
    n = int(round(horizon / step))
    ref = smib_reference(system, step, n) if reference is None else reference[: n + 1]
    t = np.arange(ref.shape[0]) * step
    err = np.abs(smib_window(system, K).states_at(t)[:, 0] - ref[:, 0])
    bad = np.flatnonzero(err > tol)
    if bad.size == 0:
        return float(t[-1])
    return float(t[bad[0] - 1]) if bad[0] > 0 else 0.0
