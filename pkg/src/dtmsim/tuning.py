"""Window-length and order selection.

The accurate window of an order-``K`` series is measured against a fine RK4
run from a set of probe states taken after fault clearing (the hardest part
of a run).  Candidate windows are whole multiples of the 1/1200 s benchmark
step.  The projected cost of a full run is ``t_one * T / t_w``, where
``t_one`` is the measured time to build and evaluate one window.
"""
from __future__ import annotations

import csv
import io
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .model.machine import SystemModel, state_derivative
from .reference_rk4 import RK4Config, rk4_integrate, rk4_simulate
from .sas_engine import SeriesDivergence, build_window

BASE_STEP = 1.0 / 1200.0
CSV_COLUMNS = ("K", "t_w", "tol", "max_err", "t_one", "t_total")


@dataclass(frozen=True)
class Probe:
    """Initial state plus its fine-step RK4 continuation on one stage."""

    state: np.ndarray
    stage: str
    offsets: np.ndarray
    reference: np.ndarray
    label: str = ""


def make_probe(model: SystemModel, state, stage: str, horizon: float = 0.6,
               step: float = BASE_STEP, refine: int = 2, label: str = "") -> Probe:
    """Reference trajectory at every multiple of ``step`` up to ``horizon``."""
    n = int(round(horizon / step))
    y = model.network.matrix(stage)
    p = model.arrays
    fine = rk4_integrate(lambda z: state_derivative(z, y, p, model.omega_s),
                         np.asarray(state, dtype=float), step / refine, n * refine)
    return Probe(np.asarray(state, dtype=float), stage, np.arange(1, n + 1) * step, fine[refine::refine], label)


def post_fault_probes(model: SystemModel, delays: Sequence[float] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6),
                      horizon: float = 0.6, step: float = BASE_STEP, refine: int = 2) -> list[Probe]:
    """Probes on the post-fault stage, starting at clearing and at the given delays after it.

    Without an event the probes start from the initial state.
    """
    net = model.network
    if not math.isfinite(net.t_clear):
        return [make_probe(model, model.initial_state, "pre", horizon, step, refine, "t=0")]
    span = net.t_clear + max(delays) + step
    run = rk4_simulate(model, RK4Config(step=step, duration=span), with_power=False)
    probes = []
    for d in delays:
        i = int(round((net.t_clear + d) / step))
        probes.append(make_probe(model, run.states[i], "post", horizon, step, refine, f"t={run.times[i]:.4f}"))
    return probes


def running_error(model: SystemModel, probe: Probe, K: int) -> np.ndarray:
    """Max-so-far error over all machines and states at each probe offset (``inf`` once divergent)."""
    try:
        w = build_window(probe.state, model, probe.stage, K)
        err = np.abs(w.states_at(probe.offsets) - probe.reference).max(axis=(1, 2))
    except SeriesDivergence:
        return np.full(probe.offsets.size, np.inf)
    err = np.where(np.isfinite(err), err, np.inf)
    return np.maximum.accumulate(err)


def _worst_running_error(model, probes, K) -> tuple[np.ndarray, np.ndarray]:
    errs = np.max([running_error(model, p, K) for p in probes], axis=0)
    return probes[0].offsets, errs


def max_window(model: SystemModel, K: int, tol: float, probes: Sequence[Probe]) -> float | None:
    """Longest grid window whose error stays within ``tol`` for every probe; ``None`` if none does."""
    if not probes:
        raise ValueError("max_window needs at least one probe state")
    offsets, errs = _worst_running_error(model, probes, K)
    ok = np.flatnonzero(errs <= tol)
    if ok.size == 0 or ok[0] != 0:
        return None
    # running maximum is monotone, so the admissible set is a prefix
    return float(offsets[ok[-1]])


@dataclass(frozen=True)
class ErrorMap:
    orders: tuple[int, ...]
    windows: tuple[float, ...]
    errors: np.ndarray  # errors[i, j] for orders[i], windows[j]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["K", "t_w", "max_err"])
        for i, K in enumerate(self.orders):
            for j, t_w in enumerate(self.windows):
                w.writerow([K, repr(t_w), repr(float(self.errors[i, j]))])
        return buf.getvalue()


def error_map(model: SystemModel, orders: Iterable[int], windows: Iterable[float],
              probes: Sequence[Probe]) -> ErrorMap:
    """Max error over a window of each length for each order; divergent cells are ``inf``."""
    orders = tuple(int(k) for k in orders)
    windows = tuple(float(t) for t in windows)
    offsets = probes[0].offsets
    idx = [int(np.searchsorted(offsets, t - 1e-12)) for t in windows]
    if any(i >= offsets.size or abs(offsets[i] - t) > 1e-9 for i, t in zip(idx, windows)):
        raise ValueError("windows must be grid points within the probe horizon")
    errors = np.empty((len(orders), len(windows)))
    for r, K in enumerate(orders):
        _, errs = _worst_running_error(model, probes, K)
        errors[r] = errs[idx]
    return ErrorMap(orders, windows, errors)


def window_cost(model: SystemModel, K: int, t_w: float, repeats: int = 20,
                step: float = BASE_STEP) -> float:
    """Median wall time to build one window and evaluate it at every output sample."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    x0 = model.initial_state
    offsets = np.arange(1, max(1, int(round(t_w / step))) + 1) * step
    times = []
    for _ in range(repeats):
        tic = time.perf_counter()
        w = build_window(x0, model, "post", K, window=None)
        w.states_at(offsets)
        w.states_at(t_w)
        times.append(time.perf_counter() - tic)
    return statistics.median(times)


@dataclass(frozen=True)
class CostRow:
    K: int
    t_w: float | None
    tol: float
    max_err: float
    t_one: float
    t_total: float


@dataclass
class CostReport:
    rows: list[CostRow] = field(default_factory=list)
    duration: float = 0.0
    scenario: str = ""

    def best(self) -> CostRow:
        feasible = [r for r in self.rows if r.t_w is not None]
        if not feasible:
            raise ValueError("no order reaches the tolerance")
        # min() keeps the first of equal keys, i.e. the smaller K
        return min(sorted(feasible, key=lambda r: r.K), key=lambda r: r.t_total)

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)


def rows_to_csv(rows: Iterable[CostRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.K, "" if r.t_w is None else repr(r.t_w), repr(r.tol), repr(r.max_err),
                    repr(r.t_one), repr(r.t_total)])
    return buf.getvalue()


class ToleranceUnreachable(ValueError):
    """No candidate order meets the tolerance on the window grid."""


def optimal_order(model: SystemModel, tol: float, orders: Iterable[int], duration: float,
                  probes: Sequence[Probe], t_one: Callable[[int, float], float] | None = None,
                  repeats: int = 20) -> tuple[int, float, CostReport]:
    """Order minimizing ``t_one(K) * duration / t_w_max(K)``; ties go to the smaller order.

    ``t_one(K, t_w)`` defaults to :func:`window_cost`; tests may inject a fixed cost.
    """
    cost = t_one or (lambda K, t_w: window_cost(model, K, t_w, repeats))
    report = CostReport(duration=duration, scenario=model.name)
    for K in sorted(set(int(k) for k in orders)):
        offsets, errs = _worst_running_error(model, probes, K)
        t_w = max_window(model, K, tol, probes) if errs[0] <= tol else None
        if t_w is None:
            report.rows.append(CostRow(K, None, tol, float(errs[0]), math.nan, math.inf))
            continue
        max_err = float(errs[int(round(t_w / (offsets[1] - offsets[0]))) - 1]) if offsets.size > 1 else float(errs[0])
        one = cost(K, t_w)
        report.rows.append(CostRow(K, t_w, tol, max_err, one, one * duration / t_w))
    try:
        best = report.best()
    except ValueError:
        raise ToleranceUnreachable(f"no order in {sorted(set(orders))} reaches tol={tol:g}") from None
    return best.K, best.t_w, report


@dataclass
class TuningGrid:
    """Measured ``t_w_max`` per (K, tol), with optional per-row costs."""

    rows: list[CostRow]
    scenario: str = ""

    def lookup(self, K: int, tol: float) -> float | None:
        for r in self.rows:
            if r.K == K and r.tol == tol:
                return r.t_w
        raise KeyError((K, tol))

    def monotonicity_violations(self) -> list[str]:
        """Pairs breaking 'non-decreasing in K at fixed tol' or 'in tol at fixed K'."""
        val = lambda r: -1.0 if r.t_w is None else r.t_w  # noqa: E731
        out = []
        for key, other in (("tol", "K"), ("K", "tol")):
            groups: dict = {}
            for r in self.rows:
                groups.setdefault(getattr(r, key), []).append(r)
            for g in groups.values():
                g = sorted(g, key=lambda r: getattr(r, other))
                for a, b in zip(g, g[1:]):
                    if val(b) < val(a):
                        out.append(f"{key}={getattr(a, key)}: t_w drops from {a.t_w} to {b.t_w} "
                                   f"as {other} goes {getattr(a, other)} -> {getattr(b, other)}")
        return out

    def to_csv(self) -> str:
        return rows_to_csv(self.rows)


def tuning_grid(model: SystemModel, orders: Iterable[int], tols: Iterable[float],
                probes: Sequence[Probe]) -> TuningGrid:
    """``t_w_max`` for every (K, tol) pair; costs are left unmeasured (``nan``)."""
    rows = []
    for K in orders:
        offsets, errs = _worst_running_error(model, probes, int(K))
        for tol in tols:
            ok = np.flatnonzero(errs <= tol)
            t_w = float(offsets[ok[-1]]) if ok.size and ok[0] == 0 else None
            max_err = float(errs[ok[-1]]) if t_w is not None else float(errs[0])
            rows.append(CostRow(int(K), t_w, float(tol), max_err, math.nan, math.nan))
    return TuningGrid(rows, model.name)
