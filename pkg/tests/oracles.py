"""Independent reference computations used by the tests.

None of these call into the package's own arithmetic, so agreement with them
is evidence rather than a tautology.
"""
import math

import numpy as np


def schoolbook_product(p, q):
    """Coefficients of p*q by the double loop over all term pairs."""
    out = [0.0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def eliminate_one_by_one(y, retained):
    """Kron reduction by Gaussian elimination of one node at a time."""
    y = np.array(y, dtype=complex)
    keep = list(retained)
    nodes = list(range(y.shape[0]))
    for e in [n for n in nodes if n not in keep]:
        idx = nodes.index(e)
        rest = [i for i in range(len(nodes)) if i != idx]
        pivot = y[idx, idx]
        new = np.empty((len(rest), len(rest)), dtype=complex)
        for a, i in enumerate(rest):
            for b, j in enumerate(rest):
                new[a, b] = y[i, j] - y[i, idx] * y[idx, j] / pivot
        y = new
        nodes = [nodes[i] for i in rest]
    order = [nodes.index(r) for r in keep]
    return y[np.ix_(order, order)]


def full_network_currents(y_full, retained, v_retained):
    """Retained-node currents with zero injection at all other nodes, solved on the full matrix."""
    m = y_full.shape[0]
    elim = [i for i in range(m) if i not in retained]
    # unknowns: eliminated-node voltages; currents at eliminated nodes are zero
    v = np.zeros(m, dtype=complex)
    v[list(retained)] = v_retained
    a = y_full[np.ix_(elim, elim)]
    rhs = -y_full[np.ix_(elim, list(retained))] @ v_retained
    v[elim] = np.linalg.solve(a, rhs)
    return (y_full @ v)[list(retained)]


def taylor_sin_cos(K):
    """Taylor coefficients of sin t and cos t up to t**K."""
    s = [0.0] * (K + 1)
    c = [0.0] * (K + 1)
    for k in range(K + 1):
        if k % 2:
            s[k] = (-1) ** (k // 2) / math.factorial(k)
        else:
            c[k] = (-1) ** (k // 2) / math.factorial(k)
    return s, c


def smib_closed_forms(H, D, P_max, P_m, omega_s, delta0, omega0):
    """Rotor-angle series coefficients 0..3 of the single-machine system, written out by hand.

    Obtained by differentiating delta' = omega_s omega and
    2H omega' = P_m - P_max sin(delta) - D omega three times at t = 0.
    """
    accel = P_m - P_max * math.sin(delta0) - D * omega0
    d0 = delta0
    d1 = omega_s * omega0
    d2 = omega_s * accel / (4.0 * H)
    d3 = (-omega_s**2 * P_max * omega0 * math.cos(delta0) / (12.0 * H)
          - omega_s * D * accel / (24.0 * H**2))
    return [d0, d1, d2, d3]
