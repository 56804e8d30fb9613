"""Bus admittance assembly, Kron reduction and the three-stage reduced network."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

STAGES = ("pre", "fault", "post")

# bolted three-phase fault as a shunt at the faulted bus
DEFAULT_FAULT_ADMITTANCE = 1.0e7


class SingularNetworkError(ValueError):
    """The eliminated block of a Kron reduction is (numerically) singular."""

    def __init__(self, condition: float):
        super().__init__(f"eliminated block is singular (condition estimate {condition:.3e})")
        self.condition = condition


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0
    tap: float = 1.0


@dataclass(frozen=True)
class StagedNetwork:
    """Reduced admittance matrices for the pre-fault, fault-on and post-fault stages."""

    y_pre: np.ndarray
    y_fault: np.ndarray
    y_post: np.ndarray
    t_fault: float = np.inf
    t_clear: float = np.inf

    def __post_init__(self) -> None:
        mats = []
        for name in ("y_pre", "y_fault", "y_post"):
            m = np.array(getattr(self, name), dtype=complex)
            m.setflags(write=False)
            object.__setattr__(self, name, m)
            mats.append(m)
        n = mats[0].shape[0]
        for m in mats:
            if m.shape != (n, n):
                raise ValueError("stage matrices must all be square and the same size")
            if not np.allclose(m, m.T, rtol=0.0, atol=1e-9 * max(1.0, np.abs(m).max())):
                raise ValueError("stage matrix is not symmetric")
        if np.isfinite(self.t_fault) and not (0.0 <= self.t_fault < self.t_clear):
            raise ValueError(f"need 0 <= t_fault < t_clear, got {self.t_fault}, {self.t_clear}")
        if not np.isfinite(self.t_fault) and np.isfinite(self.t_clear):
            raise ValueError("t_clear given without t_fault")

    @property
    def n(self) -> int:
        return self.y_pre.shape[0]

    def matrix(self, stage: str) -> np.ndarray:
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        return getattr(self, f"y_{stage}")

    def stage_between(self, t0: float, t1: float) -> str:
        """Stage active on the open interval ``(t0, t1)``."""
        mid = 0.5 * (t0 + t1)
        if mid < self.t_fault:
            return "pre"
        if mid < self.t_clear:
            return "fault"
        return "post"

    @classmethod
    def constant(cls, y: np.ndarray) -> "StagedNetwork":
        """Single topology for the whole run (no event)."""
        return cls(y, y, y)


def build_ybus(n_bus: int, branches: Iterable[Branch], shunts: Sequence[complex] | None = None) -> np.ndarray:
    """Nodal admittance matrix; taps sit on the from-bus side. Buses are 1-based."""
    y = np.zeros((n_bus, n_bus), dtype=complex)
    for br in branches:
        i, j = br.from_bus - 1, br.to_bus - 1
        ys = 1.0 / complex(br.r, br.x)
        a = br.tap or 1.0
        y[i, i] += (ys + 0.5j * br.b) / a**2
        y[j, j] += ys + 0.5j * br.b
        y[i, j] -= ys / a
        y[j, i] -= ys / a
    if shunts is not None:
        y[np.diag_indices(n_bus)] += np.asarray(shunts, dtype=complex)
    return y


def kron_reduce(y_bus: np.ndarray, retained: Sequence[int]) -> np.ndarray:
    """Schur complement ``Y_rr - Y_re Y_ee^-1 Y_er`` onto the retained (0-based) nodes."""
    y_bus = np.asarray(y_bus, dtype=complex)
    m = y_bus.shape[0]
    if y_bus.shape != (m, m):
        raise ValueError("admittance matrix must be square")
    r = np.asarray(retained, dtype=int)
    if r.size == 0 or len(set(r.tolist())) != r.size or r.min() < 0 or r.max() >= m:
        raise ValueError("retained indices must be distinct and within the matrix")
    e = np.setdiff1d(np.arange(m), r)
    y_rr = y_bus[np.ix_(r, r)]
    if e.size == 0:
        return y_rr.copy()
    y_ee = y_bus[np.ix_(e, e)]
    cond = np.linalg.cond(y_ee)
    if not np.isfinite(cond) or cond > 1e15:
        raise SingularNetworkError(cond)
    return y_rr - y_bus[np.ix_(r, e)] @ np.linalg.solve(y_ee, y_bus[np.ix_(e, r)])


def load_shunts(voltages: np.ndarray, p_load: np.ndarray, q_load: np.ndarray) -> np.ndarray:
    """Constant-impedance equivalent ``(P - jQ)/|V|^2`` of each bus load."""
    return (np.asarray(p_load) - 1j * np.asarray(q_load)) / np.abs(voltages) ** 2


def augment_with_machines(y_bus: np.ndarray, gen_buses: Sequence[int], z_internal: Sequence[complex]) -> np.ndarray:
    """Append one internal node per machine behind its impedance; internal nodes go last."""
    nb = y_bus.shape[0]
    ng = len(gen_buses)
    y = np.zeros((nb + ng, nb + ng), dtype=complex)
    y[:nb, :nb] = y_bus
    for k, (bus, z) in enumerate(zip(gen_buses, z_internal)):
        yg = 1.0 / z
        i, g = bus - 1, nb + k
        y[i, i] += yg
        y[g, g] += yg
        y[i, g] -= yg
        y[g, i] -= yg
    return y


def staged_matrices(
    n_bus: int,
    branches: Sequence[Branch],
    shunts: np.ndarray,
    gen_buses: Sequence[int],
    z_internal: Sequence[complex],
    faulted_bus: int | None,
    tripped_branch: tuple[int, int] | None,
    fault_admittance: float = DEFAULT_FAULT_ADMITTANCE,
) -> dict[str, np.ndarray]:
    """Reduced matrices (internal machine nodes only) for the three stages."""
    ng = len(gen_buses)
    internal = list(range(n_bus, n_bus + ng))

    def reduced(brs, extra_shunt):
        sh = np.array(shunts, dtype=complex)
        if extra_shunt is not None:
            sh[extra_shunt - 1] += fault_admittance
        y = augment_with_machines(build_ybus(n_bus, brs, sh), gen_buses, z_internal)
        return kron_reduce(y, internal)

    post_branches = list(branches)
    if tripped_branch is not None:
        pair = set(tripped_branch)
        hits = [b for b in branches if {b.from_bus, b.to_bus} == pair]
        if not hits:
            raise ValueError(f"tripped branch {tripped_branch} not found")
        # only the first circuit is tripped when there are parallel ones
        post_branches.remove(hits[0])
    y_pre = reduced(branches, None)
    return {
        "pre": y_pre,
        "fault": reduced(branches, faulted_bus) if faulted_bus is not None else y_pre,
        "post": reduced(post_branches, None),
    }
