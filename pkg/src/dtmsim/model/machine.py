"""Two-axis generator data, steady-state initialization and network algebra.

Frame convention (Sauer-Pai): a machine quantity with dq components
``(f_d, f_q)`` appears in the network frame as
``f_x + j f_y = (f_d + j f_q) * exp(j(delta - pi/2))``, i.e.::

    e_x =  sin(delta) e'_d + cos(delta) e'_q
    e_y = -cos(delta) e'_d + sin(delta) e'_q
    i_d =  sin(delta) i_x - cos(delta) i_y
    i_q =  cos(delta) i_x + sin(delta) i_y

The network admittance matrix maps the internal voltages ``e_x + j e_y`` of
all machines to their injected currents; the transient reactance ``xp_d`` and
``R_a`` are folded into it (see :mod:`dtmsim.model.network`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .network import StagedNetwork

OMEGA_S_60HZ = 2.0 * math.pi * 60.0

STATE_NAMES = ("delta", "omega", "ep_q", "ep_d")
ALGEBRAIC_NAMES = ("i_d", "i_q", "P_e", "e_x", "e_y", "i_x", "i_y", "e_d", "e_q")


@dataclass(frozen=True)
class MachineParams:
    H: float
    D: float
    x_d: float
    x_q: float
    xp_d: float
    xp_q: float
    Tp_d0: float
    Tp_q0: float
    R_a: float = 0.0
    P_m: float = 0.0
    e_fd: float = 0.0

    def __post_init__(self) -> None:
        problems = []
        if not self.H > 0:
            problems.append("H must be > 0")
        if not (self.Tp_d0 > 0 and self.Tp_q0 > 0):
            problems.append("Tp_d0 and Tp_q0 must be > 0")
        if not (self.xp_d > 0 and self.xp_q > 0):
            problems.append("transient reactances must be > 0")
        if self.x_d < self.xp_d or self.x_q < self.xp_q:
            problems.append("synchronous reactance below transient reactance")
        if self.D < 0:
            problems.append("D must be >= 0")
        if problems:
            raise ValueError("invalid machine parameters: " + "; ".join(problems))


@dataclass(frozen=True)
class MachineState:
    delta: float
    omega: float
    ep_q: float
    ep_d: float

    def as_array(self) -> np.ndarray:
        return np.array([self.delta, self.omega, self.ep_q, self.ep_d])


@dataclass(frozen=True)
class AlgebraicState:
    i_d: float
    i_q: float
    P_e: float
    e_x: float
    e_y: float
    i_x: float
    i_y: float
    e_d: float
    e_q: float


@dataclass(frozen=True)
class MachineArrays:
    """Column view of a machine list, one array per parameter."""

    H: np.ndarray
    D: np.ndarray
    x_d: np.ndarray
    x_q: np.ndarray
    xp_d: np.ndarray
    xp_q: np.ndarray
    Tp_d0: np.ndarray
    Tp_q0: np.ndarray
    R_a: np.ndarray
    P_m: np.ndarray
    e_fd: np.ndarray

    @classmethod
    def from_params(cls, machines: Sequence[MachineParams]) -> "MachineArrays":
        cols = {f.name: np.array([getattr(m, f.name) for m in machines], dtype=float) for f in fields(cls)}
        for a in cols.values():
            a.setflags(write=False)
        return cls(**cols)


@dataclass(frozen=True)
class SystemModel:
    """Machines plus staged reduced network; immutable after construction."""

    machines: tuple[MachineParams, ...]
    network: StagedNetwork
    omega_s: float = OMEGA_S_60HZ
    initial_state: np.ndarray | None = None
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "machines", tuple(self.machines))
        n = len(self.machines)
        if n < 1:
            raise ValueError("model needs at least one machine")
        if self.network.n != n:
            raise ValueError(f"network is {self.network.n}x{self.network.n} but there are {n} machines")
        if self.initial_state is not None:
            x0 = np.array(self.initial_state, dtype=float)
            if x0.shape != (n, 4) or not np.all(np.isfinite(x0)):
                raise ValueError(f"initial_state must be a finite ({n}, 4) array")
            x0.setflags(write=False)
            object.__setattr__(self, "initial_state", x0)

    @property
    def n(self) -> int:
        return len(self.machines)

    @cached_property
    def arrays(self) -> MachineArrays:
        return MachineArrays.from_params(self.machines)


def states_to_array(states) -> np.ndarray:
    """``(N, 4)`` array from a sequence of :class:`MachineState` (arrays pass through)."""
    if isinstance(states, np.ndarray):
        return np.asarray(states, dtype=float)
    return np.array([s.as_array() for s in states], dtype=float).reshape(-1, 4)


def array_to_states(x: np.ndarray) -> list[MachineState]:
    return [MachineState(*map(float, row)) for row in np.asarray(x)]


def _dq_to_xy(s, c, f_d, f_q):
    return s * f_d + c * f_q, -c * f_d + s * f_q


def _xy_to_dq(s, c, f_x, f_y):
    return s * f_x - c * f_y, c * f_x + s * f_y


def algebraic_arrays(x: np.ndarray, y: np.ndarray, p: MachineArrays) -> dict[str, np.ndarray]:
    """Vectorized point-wise algebra for an ``(N, 4)`` state array."""
    delta, _, ep_q, ep_d = x.T
    s = np.sin(delta)
    c = np.cos(delta)
    e_x, e_y = _dq_to_xy(s, c, ep_d, ep_q)
    current = y @ (e_x + 1j * e_y)
    i_x = current.real
    i_y = current.imag
    i_d, i_q = _xy_to_dq(s, c, i_x, i_y)
    e_d = ep_d - p.R_a * i_d + p.xp_q * i_q
    e_q = ep_q - p.xp_d * i_d - p.R_a * i_q
    return {
        "i_d": i_d, "i_q": i_q, "P_e": e_d * i_d + e_q * i_q,
        "e_x": e_x, "e_y": e_y, "i_x": i_x, "i_y": i_y, "e_d": e_d, "e_q": e_q,
    }


def algebraic_eval(states, stage_matrix: np.ndarray, params: Sequence[MachineParams]) -> list[AlgebraicState]:
    """Algebraic variables of every machine at one instant."""
    x = states_to_array(states)
    y = np.asarray(stage_matrix)
    if y.shape != (x.shape[0], x.shape[0]) or len(params) != x.shape[0]:
        raise ValueError("dimension mismatch between states, matrix and parameters")
    alg = algebraic_arrays(x, y, MachineArrays.from_params(params))
    return [AlgebraicState(**{k: float(v[i]) for k, v in alg.items()}) for i in range(x.shape[0])]


def state_derivative(x: np.ndarray, y: np.ndarray, p: MachineArrays, omega_s: float) -> np.ndarray:
    """Right-hand side of the two-axis swing model, shape ``(N, 4)``."""
    alg = algebraic_arrays(x, y, p)
    omega = x[:, 1]
    dx = np.empty_like(x)
    dx[:, 0] = omega_s * omega
    dx[:, 1] = (p.P_m - alg["P_e"] - p.D * omega) / (2.0 * p.H)
    dx[:, 2] = (p.e_fd - x[:, 2] - (p.x_d - p.xp_d) * alg["i_d"]) / p.Tp_d0
    dx[:, 3] = (-x[:, 3] + (p.x_q - p.xp_q) * alg["i_q"]) / p.Tp_q0
    return dx


def init_steady_state(
    terminal_voltage: complex, injected_power: complex, params: MachineParams
) -> tuple[MachineState, MachineParams]:
    """Equilibrium state for one machine and the ``P_m``/``e_fd`` that hold it.

    The internal voltage seen by the network is ``E = V + (R_a + j xp_d) I``.
    The rotor angle places the q-axis on ``E + j(x_q - xp_q) I``, which makes
    ``e'_d = (x_q - xp_q) i_q`` hold exactly; with ``xp_d == xp_q`` this is the
    classical ``V + (R_a + j x_q) I`` phasor.
    """
    v = complex(terminal_voltage)
    if abs(v) == 0.0:
        raise ValueError("terminal voltage magnitude is zero")
    current = (complex(injected_power) / v).conjugate()
    internal = v + complex(params.R_a, params.xp_d) * current
    q_axis = internal + 1j * (params.x_q - params.xp_q) * current
    delta = math.atan2(q_axis.imag, q_axis.real) if abs(q_axis) > 0 else math.atan2(v.imag, v.real)
    rot = complex(math.sin(delta), math.cos(delta))  # exp(-j(delta - pi/2))
    e_dq = internal * rot
    i_dq = current * rot
    ep_d, ep_q = e_dq.real, e_dq.imag
    i_d, i_q = i_dq.real, i_dq.imag
    e_d = ep_d - params.R_a * i_d + params.xp_q * i_q
    e_q = ep_q - params.xp_d * i_d - params.R_a * i_q
    p_e = e_d * i_d + e_q * i_q
    e_fd = ep_q + (params.x_d - params.xp_d) * i_d
    state = MachineState(delta=delta, omega=0.0, ep_q=ep_q, ep_d=ep_d)
    return state, replace(params, P_m=p_e, e_fd=e_fd)
