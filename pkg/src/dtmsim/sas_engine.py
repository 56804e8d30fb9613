"""Window-wise power-series solution of the two-axis multi-machine model.

For one window the state coefficients ``Phi(k)`` (delta, omega, e'_q, e'_d)
and algebraic coefficients ``Psi(k)`` are generated order by order::

    Psi(0) <- Phi(0);  Phi(1) <- Phi(0), Psi(0);  Psi(1) <- Phi(0..1); ...

and the solution inside the window is the truncated series evaluated at the
offset from the window anchor.  :func:`simulate` chains windows, re-anchoring
each one on the previous window's final state and switching the network
stage at the fault and clearing instants.

Every coefficient of one order is the sum of a fixed list of addends, grouped
into sequential rows (state, trig, emf, network, dq currents, terminal
voltage, power).  The sequential builder and :func:`parallel_build_window`
run the same addend kernels, so both produce bit-identical coefficients; the
parallel one only spreads the addends of a row over a thread pool and waits
at the end of each row.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dt_core import Series, TrigPair, conv_at, horner
from .model.machine import (
    ALGEBRAIC_NAMES,
    STATE_NAMES,
    AlgebraicState,
    MachineState,
    SystemModel,
    algebraic_arrays,
    states_to_array,
)

log = logging.getLogger(__name__)

# |Phi(k)| * t_w**k above this aborts the window
BLOWUP_LIMIT = 1.0e6


class SeriesDivergence(ArithmeticError):
    """Coefficients blew up while building (or chaining) a window."""

    def __init__(self, message: str, window: int | None = None, time: float | None = None):
        super().__init__(message)
        self.window = window
        self.time = time


@dataclass(frozen=True)
class WindowSAS:
    """All series of one window, anchored at ``anchor_time``.

    ``phi[k, i, j]`` is coefficient ``k`` of state ``STATE_NAMES[j]`` of
    machine ``i``; ``psi`` does the same for ``ALGEBRAIC_NAMES`` and
    ``trig[..., 0/1]`` holds the sin/cos series of each rotor angle.
    """

    anchor_time: float
    stage: str
    phi: np.ndarray
    psi: np.ndarray
    trig: np.ndarray

    @property
    def order(self) -> int:
        return self.phi.shape[0] - 1

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    def state_series(self, machine: int, name: str) -> Series:
        return Series(self.phi[:, machine, STATE_NAMES.index(name)])

    def algebraic_series(self, machine: int, name: str) -> Series:
        return Series(self.psi[:, machine, ALGEBRAIC_NAMES.index(name)])

    def machine_series(self, machine: int) -> dict[str, Series]:
        return {name: self.state_series(machine, name) for name in STATE_NAMES}

    def trig_pair(self, machine: int) -> TrigPair:
        return TrigPair(Series(self.trig[:, machine, 0]), Series(self.trig[:, machine, 1]))

    def states_at(self, t_offset) -> np.ndarray:
        """State array ``(N, 4)`` at one offset, or ``(T, N, 4)`` for many."""
        return horner(self.phi, t_offset)

    def algebraic_at(self, t_offset) -> np.ndarray:
        return horner(self.psi, t_offset)


@dataclass(frozen=True)
class SimConfig:
    order: int = 12
    window: float = 0.2
    duration: float = 6.0
    step: float = 1.0 / 1200.0
    tol: float = 1.0e-5
    parallel: bool = False
    workers: int = 4
    # "series": P_e from its own power series; "pointwise": recomputed from the states
    algebraic: str = "series"

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError("order K must be >= 1")
        if not (0 < self.window <= self.duration):
            raise ValueError("need 0 < window <= duration")
        if not (0 < self.step <= self.window + 1e-12):
            raise ValueError("output step must be positive and no longer than the window")
        if self.algebraic not in ("series", "pointwise"):
            raise ValueError("algebraic must be 'series' or 'pointwise'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class Trajectory:
    """Sampled states (``states[t, machine, STATE_NAMES]``) plus run metadata."""

    times: np.ndarray
    states: np.ndarray
    p_e: np.ndarray | None = None
    boundaries: np.ndarray | None = None
    window_seconds: np.ndarray | None = None
    method: str = "dtm"
    wall_seconds: float = 0.0
    meta: dict = field(default_factory=dict)
    windows: list[WindowSAS] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape[0] != self.times.size:
            raise ValueError("channel length differs from number of time samples")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def n_windows(self) -> int:
        return 0 if self.boundaries is None else len(self.boundaries) - 1

    @property
    def delta(self) -> np.ndarray:
        return self.states[:, :, 0]

    @property
    def omega(self) -> np.ndarray:
        return self.states[:, :, 1]


# -- coefficient kernels ----------------------------------------------------------

def _halves(k: int) -> tuple[tuple[int, int], tuple[int, int]]:
    h = (k + 1) // 2
    return (0, h), (h, k + 1)


class _Builder:
    """Mutable coefficient workspace for one window; discarded after build."""

    def __init__(self, x0: np.ndarray, model: SystemModel, stage: str, K: int):
        self.K = K
        self.n = x0.shape[0]
        self.p = model.arrays
        self.omega_s = model.omega_s
        y = model.network.matrix(stage)
        self.G = np.ascontiguousarray(y.real)
        self.B = np.ascontiguousarray(y.imag)
        z = lambda: np.zeros((K + 1, self.n))  # noqa: E731
        self.delta, self.omega, self.ep_q, self.ep_d = z(), z(), z(), z()
        self.sin, self.cos = z(), z()
        self.i_d, self.i_q, self.P_e = z(), z(), z()
        self.e_x, self.e_y, self.i_x, self.i_y, self.e_d, self.e_q = z(), z(), z(), z(), z(), z()
        self.delta[0], self.omega[0], self.ep_q[0], self.ep_d[0] = x0.T
        self.sin[0] = np.sin(x0[:, 0])
        self.cos[0] = np.cos(x0[:, 0])
        # per-row addend buffers: name -> (n_addends, N)
        self.parts: dict[str, np.ndarray] = {}
        self.rows = self._rows()

    # Each row: (units, combine).  A unit is (buffer, addend index, kernel);
    # kernel(k, sl) returns that addend for the machines in slice sl.
    def _rows(self):
        return [
            ([("delta", 0, self._u_delta), ("omega", 0, self._u_omega),
              ("ep_q", 0, self._u_ep_q), ("ep_d", 0, self._u_ep_d)], self._c_state),
            ([("sin", 0, self._u_trig(self.cos, 0)), ("sin", 1, self._u_trig(self.cos, 1)),
              ("cos", 0, self._u_trig(self.sin, 0)), ("cos", 1, self._u_trig(self.sin, 1))], self._c_trig),
            ([("e_x", 0, self._u_conv(self.sin, self.ep_d)), ("e_x", 1, self._u_conv(self.cos, self.ep_q)),
              ("e_y", 0, self._u_conv(self.sin, self.ep_q)), ("e_y", 1, self._u_conv(self.cos, self.ep_d))],
             self._c_emf),
            ([("i_x", 0, self._u_net(self.G, self.e_x)), ("i_x", 1, self._u_net(self.B, self.e_y)),
              ("i_y", 0, self._u_net(self.G, self.e_y)), ("i_y", 1, self._u_net(self.B, self.e_x))],
             self._c_net),
            ([("i_d", 0, self._u_conv(self.sin, self.i_x)), ("i_d", 1, self._u_conv(self.cos, self.i_y)),
              ("i_q", 0, self._u_conv(self.cos, self.i_x)), ("i_q", 1, self._u_conv(self.sin, self.i_y))],
             self._c_dq),
            ([("e_d", 0, self._u_e_d), ("e_q", 0, self._u_e_q)], self._c_terminal),
            ([("P_e", 0, self._u_conv(self.e_d, self.i_d, 0)), ("P_e", 1, self._u_conv(self.e_d, self.i_d, 1)),
              ("P_e", 2, self._u_conv(self.e_q, self.i_q, 0)), ("P_e", 3, self._u_conv(self.e_q, self.i_q, 1))],
             self._c_power),
        ]

    # row 1: state coefficients of order k from order k-1
    def _u_delta(self, k, sl):
        return self.omega_s * self.omega[k - 1, sl] / k

    def _u_omega(self, k, sl):
        p = self.p
        drive = p.P_m[sl] if k == 1 else 0.0
        return (drive - self.P_e[k - 1, sl] - p.D[sl] * self.omega[k - 1, sl]) / (2.0 * p.H[sl] * k)

    def _u_ep_q(self, k, sl):
        p = self.p
        drive = p.e_fd[sl] if k == 1 else 0.0
        return (drive - self.ep_q[k - 1, sl] - (p.x_d[sl] - p.xp_d[sl]) * self.i_d[k - 1, sl]) / (p.Tp_d0[sl] * k)

    def _u_ep_d(self, k, sl):
        p = self.p
        return (-self.ep_d[k - 1, sl] + (p.x_q[sl] - p.xp_q[sl]) * self.i_q[k - 1, sl]) / (p.Tp_q0[sl] * k)

    def _c_state(self, k):
        for name in ("delta", "omega", "ep_q", "ep_d"):
            getattr(self, name)[k] = self.parts[name][0]

    # row 2: sin/cos extension, each sum split into two index halves
    def _u_trig(self, other, half):
        def kernel(k, sl):
            lo, hi = (0, k // 2) if half == 0 else (k // 2, k)
            if hi <= lo:
                return np.zeros(self.delta[0, sl].shape)
            m = np.arange(lo, hi)
            terms = other[m, sl] * ((k - m)[:, None] * self.delta[k - m, sl])
            return np.add.accumulate(terms, axis=0)[-1]
        return kernel

    def _c_trig(self, k):
        s, c = self.parts["sin"], self.parts["cos"]
        self.sin[k] = (s[0] + s[1]) / k
        self.cos[k] = -(c[0] + c[1]) / k

    def _u_conv(self, a, b, half=None):
        def kernel(k, sl):
            if half is None:
                return conv_at(a[:, sl], b[:, sl], k)
            lo, hi = _halves(k)[half]
            return conv_at(a[:, sl], b[:, sl], k, lo, hi)
        return kernel

    def _c_emf(self, k):
        ex, ey = self.parts["e_x"], self.parts["e_y"]
        self.e_x[k] = ex[0] + ex[1]
        self.e_y[k] = ey[0] - ey[1]

    # row 4: network map, applied to order-k emf coefficients
    def _u_net(self, mat, vec):
        def kernel(k, sl):
            return np.add.accumulate(mat[sl] * vec[k], axis=1)[:, -1]
        return kernel

    def _c_net(self, k):
        ix, iy = self.parts["i_x"], self.parts["i_y"]
        self.i_x[k] = ix[0] - ix[1]
        self.i_y[k] = iy[0] + iy[1]

    def _c_dq(self, k):
        i_d, i_q = self.parts["i_d"], self.parts["i_q"]
        self.i_d[k] = i_d[0] - i_d[1]
        self.i_q[k] = i_q[0] + i_q[1]

    def _u_e_d(self, k, sl):
        p = self.p
        return self.ep_d[k, sl] - p.R_a[sl] * self.i_d[k, sl] + p.xp_q[sl] * self.i_q[k, sl]

    def _u_e_q(self, k, sl):
        p = self.p
        return self.ep_q[k, sl] - p.xp_d[sl] * self.i_d[k, sl] - p.R_a[sl] * self.i_q[k, sl]

    def _c_terminal(self, k):
        self.e_d[k] = self.parts["e_d"][0]
        self.e_q[k] = self.parts["e_q"][0]

    def _c_power(self, k):
        pe = self.parts["P_e"]
        self.P_e[k] = (pe[0] + pe[1]) + (pe[2] + pe[3])

    # -- drivers

    def alloc_parts(self, units):
        for name, idx, _ in units:
            cur = self.parts.get(name)
            need = idx + 1
            if cur is None or cur.shape[0] < need:
                self.parts[name] = np.zeros((max(need, 4), self.n))

    def run_row(self, row, k, runner: Callable[[list], None]):
        units, combine = row
        self.alloc_parts(units)
        runner([(name, idx, kernel, k) for name, idx, kernel in units])
        combine(k)

    def check(self, k: int, window: float | None) -> None:
        phi_k = np.stack([self.delta[k], self.omega[k], self.ep_q[k], self.ep_d[k]])
        if not np.all(np.isfinite(phi_k)):
            raise SeriesDivergence(f"non-finite state coefficient at order {k}")
        if window is not None and k > 0:
            scale = np.max(np.abs(phi_k)) * window**k
            if scale > BLOWUP_LIMIT:
                raise SeriesDivergence(f"|Phi({k})| t_w^{k} = {scale:.3e} exceeds {BLOWUP_LIMIT:g}")

    def result(self, anchor: float, stage: str) -> WindowSAS:
        phi = np.stack([self.delta, self.omega, self.ep_q, self.ep_d], axis=-1)
        psi = np.stack([getattr(self, name) for name in ALGEBRAIC_NAMES], axis=-1)
        trig = np.stack([self.sin, self.cos], axis=-1)
        for a in (phi, psi, trig):
            a.setflags(write=False)
        return WindowSAS(anchor, stage, phi, psi, trig)


def build_window(initial, model: SystemModel, stage: str = "pre", K: int = 12,
                 anchor_time: float = 0.0, window: float | None = None) -> WindowSAS:
    """Series of order ``K`` for every state and algebraic variable from ``initial``.

    ``window`` (s), when given, enables the blow-up check
    ``|Phi(k)| * window**k <= BLOWUP_LIMIT``.
    """
    full = slice(0, model.n)
    holder: dict = {}

    def run(tasks):
        parts = holder["b"].parts
        for name, idx, kernel, k in tasks:
            parts[name][idx, full] = kernel(k, full)

    return _build_with(initial, model, stage, K, anchor_time, window, run, holder)


def _build_with(initial, model, stage, K, anchor, window, run, holder) -> WindowSAS:
    x0 = states_to_array(initial)
    if x0.shape != (model.n, 4):
        raise ValueError(f"expected {model.n} machine states, got shape {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise SeriesDivergence("non-finite initial state")
    if K < 1:
        raise ValueError("order K must be >= 1")
    b = _Builder(x0, model, stage, K)
    holder["b"] = b
    for row in b.rows[2:]:
        b.run_row(row, 0, run)
    for k in range(1, K + 1):
        for row in b.rows:
            b.run_row(row, k, run)
        b.check(k, window)
    return b.result(anchor, stage)


class CoefficientPool:
    """Thread pool that spreads each row's addends over ``workers`` threads.

    Machines are cut into contiguous chunks so that a row (4 addend kinds)
    yields about ``workers`` tasks; each task writes a disjoint slot and the
    row waits for all of them before its addends are combined.
    """

    def __init__(self, workers: int = 4):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.workers = workers
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="dtm")

    def close(self) -> None:
        self._pool.shutdown(wait=True)

    def __enter__(self) -> "CoefficientPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def chunks(self, n: int, n_units: int) -> list[slice]:
        per_unit = max(1, min(n, math.ceil(self.workers / max(n_units, 1))))
        edges = np.linspace(0, n, per_unit + 1).round().astype(int)
        return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def parallel_build_window(initial, model: SystemModel, stage: str = "pre", K: int = 12,
                          anchor_time: float = 0.0, window: float | None = None,
                          workers: int = 4, pool: CoefficientPool | None = None) -> WindowSAS:
    """Same coefficients as :func:`build_window`, computed row by row on a thread pool."""
    own = pool is None
    pool = pool or CoefficientPool(workers)
    holder: dict = {}

    def run(tasks):
        parts = holder["b"].parts
        slices = pool.chunks(model.n, len(tasks))

        def job(name, idx, kernel, k, sl):
            parts[name][idx, sl] = kernel(k, sl)

        futures = [pool._pool.submit(job, name, idx, kernel, k, sl)
                   for name, idx, kernel, k in tasks for sl in slices]
        for f in futures:  # row barrier
            f.result()

    try:
        return _build_with(initial, model, stage, K, anchor_time, window, run, holder)
    finally:
        if own:
            pool.close()


def evaluate_window(w: WindowSAS, t_offset: float) -> tuple[list[MachineState], list[AlgebraicState]]:
    """States and algebraic variables of every machine at ``t_offset`` into the window."""
    if t_offset < 0:
        raise ValueError("t_offset must be >= 0")
    x = w.states_at(t_offset)
    a = w.algebraic_at(t_offset)
    states = [MachineState(*map(float, row)) for row in x]
    alg = [AlgebraicState(**dict(zip(ALGEBRAIC_NAMES, map(float, row)))) for row in a]
    return states, alg


# -- multi-window driver --------------------------------------------------------------

def window_boundaries(duration: float, window: float, events=()) -> np.ndarray:
    """Grid ``0, t_w, 2 t_w, ..., T`` with event instants forced in as extra boundaries."""
    n = max(1, math.ceil(duration / window - 1e-9))
    grid = [min(i * window, duration) for i in range(n + 1)]
    for ev in events:
        if ev is None or not (0.0 < ev < duration):
            continue
        j = int(np.argmin([abs(g - ev) for g in grid]))
        if abs(grid[j] - ev) <= 1e-9:
            grid[j] = ev
        else:
            grid.append(ev)
    return np.array(sorted(grid))


def sample_times(duration: float, step: float) -> np.ndarray:
    n = int(math.floor(duration / step + 1e-9))
    t = np.arange(n + 1) * step
    if duration - t[-1] > 1e-9:
        t = np.append(t, duration)
    return t


def simulate(model: SystemModel, cfg: SimConfig, initial=None, keep_windows: bool = False) -> Trajectory:
    """Chain windows over ``[0, cfg.duration]``, switching stages at the event times.

    With ``keep_windows`` the built :class:`WindowSAS` objects are kept on the result.
    """
    x = states_to_array(model.initial_state if initial is None else initial)
    net = model.network
    bounds = window_boundaries(cfg.duration, cfg.window, (net.t_fault, net.t_clear))
    times = sample_times(cfg.duration, cfg.step)
    states = np.empty((times.size, model.n, 4))
    p_e = np.empty((times.size, model.n))
    states[0] = x
    walls = np.empty(len(bounds) - 1)
    kept: list[WindowSAS] | None = [] if keep_windows else None
    pool = CoefficientPool(cfg.workers) if cfg.parallel else None
    pe_col = ALGEBRAIC_NAMES.index("P_e")
    t_start = time.perf_counter()
    try:
        for w_idx, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
            stage = net.stage_between(a, b)
            tic = time.perf_counter()
            try:
                if pool is None:
                    sas = build_window(x, model, stage, cfg.order, a, b - a)
                else:
                    sas = parallel_build_window(x, model, stage, cfg.order, a, b - a, pool=pool)
            except SeriesDivergence as exc:
                raise SeriesDivergence(f"window {w_idx} at t={a:.6f}s: {exc}", w_idx, float(a)) from exc
            lo = np.searchsorted(times, a, side="right")
            hi = np.searchsorted(times, b + 1e-12, side="right")
            if w_idx == 0:
                lo = 0
            offsets = times[lo:hi] - a
            if hi > lo:
                states[lo:hi] = sas.states_at(offsets)
                if cfg.algebraic == "series":
                    p_e[lo:hi] = horner(sas.psi[..., pe_col], offsets)
                else:
                    y = net.matrix(stage)
                    for j in range(lo, hi):
                        p_e[j] = algebraic_arrays(states[j], y, model.arrays)["P_e"]
            if kept is not None:
                kept.append(sas)
            x = sas.states_at(b - a)
            if not np.all(np.isfinite(x)):
                raise SeriesDivergence(f"non-finite state at end of window {w_idx}", w_idx, float(a))
            walls[w_idx] = time.perf_counter() - tic
    finally:
        if pool is not None:
            pool.close()
    wall = time.perf_counter() - t_start
    log.debug("dtm run: %d windows, %.3f s", len(walls), wall)
    return Trajectory(times, states, p_e, bounds, walls, "dtm", wall,
                      {"order": cfg.order, "window": cfg.window, "parallel": cfg.parallel}, kept)
