"""Regenerate ``src/dtmsim/data/ieee39.json`` from the public New England data.

Runs a full Newton-Raphson power flow (the package itself never solves power
flow) and writes the solved bus voltages with full float precision so that the
loader can reproduce an exact equilibrium.

    python scripts/make_ieee39.py
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

BASE_MVA = 100.0
OUT = Path(__file__).resolve().parents[1] / "src" / "dtmsim" / "data" / "ieee39.json"

# from, to, r, x, b, tap (0 = nominal)
BRANCHES = [
    (1, 2, 0.0035, 0.0411, 0.6987, 0.0), (1, 39, 0.0010, 0.0250, 0.7500, 0.0),
    (2, 3, 0.0013, 0.0151, 0.2572, 0.0), (2, 25, 0.0070, 0.0086, 0.1460, 0.0),
    (3, 4, 0.0013, 0.0213, 0.2214, 0.0), (3, 18, 0.0011, 0.0133, 0.2138, 0.0),
    (4, 5, 0.0008, 0.0128, 0.1342, 0.0), (4, 14, 0.0008, 0.0129, 0.1382, 0.0),
    (5, 6, 0.0002, 0.0026, 0.0434, 0.0), (5, 8, 0.0008, 0.0112, 0.1476, 0.0),
    (6, 7, 0.0006, 0.0092, 0.1130, 0.0), (6, 11, 0.0007, 0.0082, 0.1389, 0.0),
    (7, 8, 0.0004, 0.0046, 0.0780, 0.0), (8, 9, 0.0023, 0.0363, 0.3804, 0.0),
    (9, 39, 0.0010, 0.0250, 1.2000, 0.0), (10, 11, 0.0004, 0.0043, 0.0729, 0.0),
    (10, 13, 0.0004, 0.0043, 0.0729, 0.0), (13, 14, 0.0009, 0.0101, 0.1723, 0.0),
    (14, 15, 0.0018, 0.0217, 0.3660, 0.0), (15, 16, 0.0009, 0.0094, 0.1710, 0.0),
    (16, 17, 0.0007, 0.0089, 0.1342, 0.0), (16, 19, 0.0016, 0.0195, 0.3040, 0.0),
    (16, 21, 0.0008, 0.0135, 0.2548, 0.0), (16, 24, 0.0003, 0.0059, 0.0680, 0.0),
    (17, 18, 0.0007, 0.0082, 0.1319, 0.0), (17, 27, 0.0013, 0.0173, 0.3216, 0.0),
    (21, 22, 0.0008, 0.0140, 0.2565, 0.0), (22, 23, 0.0006, 0.0096, 0.1846, 0.0),
    (23, 24, 0.0022, 0.0350, 0.3610, 0.0), (25, 26, 0.0032, 0.0323, 0.5130, 0.0),
    (26, 27, 0.0014, 0.0147, 0.2396, 0.0), (26, 28, 0.0043, 0.0474, 0.7802, 0.0),
    (26, 29, 0.0057, 0.0625, 1.0290, 0.0), (28, 29, 0.0014, 0.0151, 0.2490, 0.0),
    (12, 11, 0.0016, 0.0435, 0.0, 1.006), (12, 13, 0.0016, 0.0435, 0.0, 1.006),
    (6, 31, 0.0000, 0.0250, 0.0, 1.070), (10, 32, 0.0000, 0.0200, 0.0, 1.070),
    (19, 33, 0.0007, 0.0142, 0.0, 1.070), (20, 34, 0.0009, 0.0180, 0.0, 1.009),
    (22, 35, 0.0000, 0.0143, 0.0, 1.025), (23, 36, 0.0005, 0.0272, 0.0, 1.000),
    (25, 37, 0.0006, 0.0232, 0.0, 1.025), (2, 30, 0.0000, 0.0181, 0.0, 1.025),
    (29, 38, 0.0008, 0.0156, 0.0, 1.025), (19, 20, 0.0007, 0.0138, 0.0, 1.060),
]

LOADS_MW = {
    3: (322.0, 2.4), 4: (500.0, 184.0), 7: (233.8, 84.0), 8: (522.0, 176.0),
    12: (7.5, 88.0), 15: (320.0, 153.0), 16: (329.0, 32.3), 18: (158.0, 30.0),
    20: (628.0, 103.0), 21: (274.0, 115.0), 23: (247.5, 84.6), 24: (308.6, -92.0),
    25: (224.0, 47.2), 26: (139.0, 17.0), 27: (281.0, 75.5), 28: (206.0, 27.6),
    29: (283.5, 26.9), 31: (9.2, 4.6), 39: (1104.0, 250.0),
}

SLACK = 31
# bus: (P MW, |V| setpoint)
GEN_SETPOINTS = {
    30: (250.0, 1.0475), 31: (None, 0.9820), 32: (650.0, 0.9831),
    33: (632.0, 0.9972), 34: (508.0, 1.0123), 35: (650.0, 1.0493),
    36: (560.0, 1.0635), 37: (540.0, 1.0278), 38: (830.0, 1.0265),
    39: (1000.0, 1.0300),
}

# bus: H, x_d, x_q, xp_d, xp_q, Tp_d0, Tp_q0 (100 MVA base)
MACHINES = {
    30: (42.0, 0.1000, 0.0690, 0.0310, 0.0080, 10.20, 0.40),
    31: (30.3, 0.2950, 0.2820, 0.0697, 0.1700, 6.56, 1.50),
    32: (35.8, 0.2495, 0.2370, 0.0531, 0.0876, 5.70, 1.50),
    33: (28.6, 0.2620, 0.2580, 0.0436, 0.1660, 5.69, 1.50),
    34: (26.0, 0.6700, 0.6200, 0.1320, 0.1660, 5.40, 0.44),
    35: (34.8, 0.2540, 0.2410, 0.0500, 0.0814, 7.30, 0.40),
    36: (26.4, 0.2950, 0.2920, 0.0490, 0.1860, 5.66, 1.50),
    37: (24.3, 0.2900, 0.2800, 0.0570, 0.0911, 6.70, 0.41),
    38: (34.5, 0.2106, 0.2050, 0.0570, 0.0587, 4.79, 1.96),
    39: (500.0, 0.0200, 0.0190, 0.0060, 0.0080, 7.00, 0.70),
}
# damping in p.u. power per p.u. speed deviation, proportional to inertia
DAMPING_PER_H = 1.0


def build_ybus(n: int) -> np.ndarray:
    y = np.zeros((n, n), dtype=complex)
    for f, t, r, x, b, tap in BRANCHES:
        i, j = f - 1, t - 1
        ys = 1.0 / complex(r, x)
        a = tap if tap else 1.0
        y[i, i] += (ys + 0.5j * b) / a**2
        y[j, j] += ys + 0.5j * b
        y[i, j] -= ys / a
        y[j, i] -= ys / a
    return y


def solve_power_flow(y: np.ndarray):
    n = y.shape[0]
    p_spec = np.zeros(n)
    q_spec = np.zeros(n)
    for bus, (p, q) in LOADS_MW.items():
        p_spec[bus - 1] -= p / BASE_MVA
        q_spec[bus - 1] -= q / BASE_MVA
    vm = np.ones(n)
    va = np.zeros(n)
    pv = []
    for bus, (p, v) in GEN_SETPOINTS.items():
        vm[bus - 1] = v
        if p is not None:
            p_spec[bus - 1] += p / BASE_MVA
            pv.append(bus - 1)
    slack = SLACK - 1
    pq = [i for i in range(n) if i != slack and i not in pv]
    ang_idx = np.array(sorted(pv + pq))
    mag_idx = np.array(pq)

    def mismatch(vm, va):
        v = vm * np.exp(1j * va)
        s = v * np.conj(y @ v)
        return np.concatenate([s.real[ang_idx] - p_spec[ang_idx], s.imag[mag_idx] - q_spec[mag_idx]])

    for _ in range(30):
        f = mismatch(vm, va)
        if np.max(np.abs(f)) < 1e-12:
            break
        # finite-difference Jacobian is plenty for a 39-bus one-off
        jac = np.zeros((f.size, f.size))
        eps = 1e-7
        for c, i in enumerate(ang_idx):
            va2 = va.copy()
            va2[i] += eps
            jac[:, c] = (mismatch(vm, va2) - f) / eps
        for c, i in enumerate(mag_idx):
            vm2 = vm.copy()
            vm2[i] += eps
            jac[:, len(ang_idx) + c] = (mismatch(vm2, va) - f) / eps
        dx = np.linalg.solve(jac, -f)
        va[ang_idx] += dx[: len(ang_idx)]
        vm[mag_idx] += dx[len(ang_idx):]
    else:
        raise RuntimeError("power flow did not converge")
    return vm * np.exp(1j * va), np.max(np.abs(mismatch(vm, va)))


def main() -> None:
    y = build_ybus(39)
    v, err = solve_power_flow(y)
    s_inj = v * np.conj(y @ v)
    print(f"power-flow mismatch {err:.2e} p.u.")

    buses = []
    for i in range(39):
        p, q = LOADS_MW.get(i + 1, (0.0, 0.0))
        buses.append({
            "id": i + 1,
            "v": [float(v[i].real), float(v[i].imag)],
            "p_load": p / BASE_MVA,
            "q_load": q / BASE_MVA,
        })
    machines = []
    generation = []
    for bus in sorted(MACHINES):
        h, xd, xq, xpd, xpq, td0, tq0 = MACHINES[bus]
        machines.append({
            "bus": bus, "H": h, "D": DAMPING_PER_H * h, "x_d": xd, "x_q": xq,
            "xp_d": xpd, "xp_q": xpq, "Tp_d0": td0, "Tp_q0": tq0, "R_a": 0.0,
        })
        p_load, q_load = LOADS_MW.get(bus, (0.0, 0.0))
        s_gen = s_inj[bus - 1] + complex(p_load, q_load) / BASE_MVA
        generation.append({"bus": bus, "p": float(s_gen.real), "q": float(s_gen.imag)})
    doc = {
        "name": "ieee39",
        "description": (
            "IEEE 10-machine 39-bus (New England) system, 100 MVA base. Branch, load and "
            "machine data from the public Athay/Pai data set; bus voltages from a Newton-Raphson "
            "power flow (scripts/make_ieee39.py). Choices not fixed by the public data: "
            "D_i = H_i (p.u. power per p.u. speed), R_a = 0, Tp_q0 = 0.4 s for the bus-30 unit "
            "(no q-axis transient time constant published), constant-impedance loads."
        ),
        "base_frequency": 60.0,
        "machines": machines,
        "network": {
            "buses": buses,
            "branches": [
                {"from": f, "to": t, "r": r, "x": x, "b": b, "tap": tap or 1.0}
                for f, t, r, x, b, tap in BRANCHES
            ],
            "generation": generation,
        },
        "event": {
            "t_fault": 1.0,
            "t_clear": 1.0 + 5.0 / 60.0,
            "faulted_bus": 3,
            "tripped_branch": [3, 4],
            "fault_admittance": 1.0e7,
        },
        "simulation": {"duration": 6.0, "order": 12, "window": 0.2, "step": 1.0 / 1200.0},
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
