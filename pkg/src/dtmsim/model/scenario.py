"""Scenario documents (JSON) to :class:`SystemModel` and back.

A scenario carries machines, a network and one fault event.  The network is
either bus-level (buses with power-flow voltages and loads, plus branches), in
which case the reduced stage matrices and the equilibrium are computed here,
or already reduced (``network.reduced`` with three matrices and
``initial_states``).  Complex numbers are ``[re, im]`` pairs.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .machine import (
    MachineParams,
    SystemModel,
    init_steady_state,
)
from .network import (
    DEFAULT_FAULT_ADMITTANCE,
    Branch,
    StagedNetwork,
    build_ybus,
    load_shunts,
    staged_matrices,
)

BUNDLED = ("ieee39",)

_PARAM_KEYS = tuple(f.name for f in fields(MachineParams))


class ScenarioError(ValueError):
    """Scenario document is malformed or inconsistent."""


@dataclass(frozen=True)
class Scenario:
    model: SystemModel
    defaults: dict[str, float] = field(default_factory=dict)
    machine_buses: tuple[int, ...] = ()
    document: dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def name(self) -> str:
        return self.model.name


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ScenarioError(f"no bundled scenario {name!r}; choose from {BUNDLED}")
    return Path(str(resources.files("dtmsim.data").joinpath(f"{name}.json")))


def load_scenario(source) -> Scenario:
    """Load from a path, a bundled name (``"ieee39"``) or an already-parsed dict."""
    if isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        if not path.exists() and str(source) in BUNDLED:
            path = bundled_path(str(source))
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read scenario {source}: {exc}") from exc
    try:
        return _parse(doc)
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc


def _cplx(pair) -> complex:
    if isinstance(pair, (int, float)):
        return complex(pair)
    re, im = pair
    return complex(float(re), float(im))


def _matrix(rows) -> np.ndarray:
    return np.array([[_cplx(v) for v in row] for row in rows], dtype=complex)


def _matrix_doc(m: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def _event_times(doc) -> tuple[float, float]:
    ev = doc.get("event") or {}
    t_fault = float(ev.get("t_fault", math.inf))
    t_clear = float(ev.get("t_clear", math.inf))
    return t_fault, t_clear


def _parse(doc: dict) -> Scenario:
    freq = float(doc.get("base_frequency", 60.0))
    omega_s = 2.0 * math.pi * freq
    recs = doc["machines"]
    if not recs:
        raise ScenarioError("scenario has no machines")
    net = doc["network"]
    t_fault, t_clear = _event_times(doc)
    defaults = {k: float(v) for k, v in (doc.get("simulation") or {}).items()}
    buses = tuple(int(r.get("bus", i + 1)) for i, r in enumerate(recs))

    if "reduced" in net:
        red = net["reduced"]
        mats = {s: _matrix(red[f"y_{s}"]) for s in ("pre", "fault", "post")}
        machines = [MachineParams(**{k: float(r[k]) for k in _PARAM_KEYS if k in r}) for r in recs]
        x0 = np.array(
            [[s["delta"], s["omega"], s["ep_q"], s["ep_d"]] for s in doc["initial_states"]], dtype=float
        )
    else:
        n_bus = len(net["buses"])
        ids = sorted(int(b["id"]) for b in net["buses"])
        if ids != list(range(1, n_bus + 1)):
            raise ScenarioError("bus ids must be 1..n")
        bus_by_id = {int(b["id"]): b for b in net["buses"]}
        v = np.array([_bus_voltage(bus_by_id[i]) for i in range(1, n_bus + 1)])
        if np.any(np.abs(v) == 0):
            raise ScenarioError("bus with zero voltage magnitude")
        p_load = np.array([float(bus_by_id[i].get("p_load", 0.0)) for i in range(1, n_bus + 1)])
        q_load = np.array([float(bus_by_id[i].get("q_load", 0.0)) for i in range(1, n_bus + 1)])
        extra = np.array(
            [complex(float(bus_by_id[i].get("g_shunt", 0.0)), float(bus_by_id[i].get("b_shunt", 0.0)))
             for i in range(1, n_bus + 1)]
        )
        shunts = load_shunts(v, p_load, q_load) + extra
        branches = [
            Branch(int(b["from"]), int(b["to"]), float(b["r"]), float(b["x"]),
                   float(b.get("b", 0.0)), float(b.get("tap", 1.0)))
            for b in net["branches"]
        ]
        injected = v * np.conj(build_ybus(n_bus, branches, shunts) @ v)
        _check_generation(net.get("generation"), injected, buses)
        raw = [MachineParams(**{k: float(r[k]) for k in _PARAM_KEYS if k in r}) for r in recs]
        machines, states = [], []
        for bus, params in zip(buses, raw):
            st, p = init_steady_state(v[bus - 1], injected[bus - 1], params)
            machines.append(p)
            states.append([st.delta, st.omega, st.ep_q, st.ep_d])
        x0 = np.array(states)
        ev = doc.get("event") or {}
        tripped = ev.get("tripped_branch")
        mats = staged_matrices(
            n_bus, branches, shunts, buses,
            [complex(m.R_a, m.xp_d) for m in machines],
            faulted_bus=ev.get("faulted_bus"),
            tripped_branch=tuple(tripped) if tripped else None,
            fault_admittance=float(ev.get("fault_admittance", DEFAULT_FAULT_ADMITTANCE)),
        )

    network = StagedNetwork(mats["pre"], mats["fault"], mats["post"], t_fault, t_clear)
    model = SystemModel(tuple(machines), network, omega_s, x0, str(doc.get("name", "")))
    return Scenario(model, defaults, buses, copy.deepcopy(doc))


def _bus_voltage(bus: dict) -> complex:
    if "v" in bus:
        return _cplx(bus["v"])
    return complex(float(bus["vm"]) * np.exp(1j * np.radians(float(bus.get("va", 0.0)))))


def _check_generation(records, injected: np.ndarray, buses) -> None:
    if not records:
        return
    for rec in records:
        bus = int(rec["bus"])
        if bus not in buses:
            continue
        given = complex(float(rec["p"]), float(rec.get("q", 0.0)))
        if abs(given - injected[bus - 1]) > 1e-6:
            raise ScenarioError(
                f"generation at bus {bus} ({given:.6f}) disagrees with the network "
                f"injection implied by the bus voltages ({injected[bus - 1]:.6f})"
            )


def reduced_document(scenario: Scenario) -> dict:
    """Scenario document with the staged reduced matrices and equilibrium states inlined."""
    doc = copy.deepcopy(scenario.document)
    model = scenario.model
    net = model.network
    doc["machines"] = [
        {"bus": bus, **{k: getattr(m, k) for k in _PARAM_KEYS}}
        for bus, m in zip(scenario.machine_buses, model.machines)
    ]
    doc["network"] = {"reduced": {f"y_{s}": _matrix_doc(net.matrix(s)) for s in ("pre", "fault", "post")}}
    doc["initial_states"] = [
        {"delta": float(r[0]), "omega": float(r[1]), "ep_q": float(r[2]), "ep_d": float(r[3])}
        for r in model.initial_state
    ]
    return doc


def save_document(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")
