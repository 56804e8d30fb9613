import numpy as np
import pytest

from dtmsim.smib import SMIBSystem, accurate_window, smib_reference, smib_window

from oracles import smib_closed_forms


def closed_forms(s):
    return smib_closed_forms(s.H, s.D, s.P_max, s.P_m, s.omega_s, s.delta0, s.omega0)


def test_first_coefficients(smib):
    w = smib_window(smib, 5)
    assert w.delta[0] == 0.26
    assert w.delta[1] == pytest.approx(0.753982, abs=5e-7)
    assert w.delta[2] == pytest.approx(-0.0954082, abs=5e-8)


def test_coefficients_match_hand_derivation(smib):
    w = smib_window(smib, 6)
    for k, ref in enumerate(closed_forms(smib)):
        assert w.delta[k] == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("D", [0.0, 1.0, 7.5])
def test_hand_derivation_other_damping(smib, D):
    s = smib.with_damping(D)
    w = smib_window(s, 3)
    for k, ref in enumerate(closed_forms(s)):
        assert w.delta[k] == pytest.approx(ref, rel=1e-12)


def test_order_does_not_change_lower_coefficients(smib):
    low, high = smib_window(smib, 8), smib_window(smib, 16)
    assert np.array_equal(low.delta.coeffs, high.delta.coeffs[:9])
    assert np.array_equal(low.omega.coeffs, high.omega.coeffs[:9])


def test_higher_order_is_not_worse(smib):
    ref = smib_reference(smib, 0.1 / 480, 480)
    t = np.arange(481) * 0.1 / 480
    errs = [np.abs(smib_window(smib, K).states_at(t)[:, 0] - ref[:, 0]).max() for K in range(3, 14)]
    for K, (a, b) in enumerate(zip(errs, errs[2:]), start=3):
        assert b <= a, f"error grew from K={K} to K={K + 2}"


def test_energy_is_conserved_without_damping(smib):
    s = smib.with_damping(0.0)
    w = smib_window(s, 15)
    x = w.states_at(np.linspace(0.0, 0.1, 101))
    v = s.energy(x[:, 0], x[:, 1])
    assert np.ptp(v) < 1e-6


def test_accurate_window_grows_with_order(smib):
    ref = smib_reference(smib, 1 / 1200, 720)
    windows = [accurate_window(smib, K, reference=ref) for K in (3, 4, 7, 15)]
    assert windows == sorted(windows) and len(set(windows)) == 4


def test_k15_accurate_within_quarter_second(smib):
    w = smib_window(smib, 15)
    ref = smib_reference(smib, 1 / 1200, 288)
    t = np.arange(289) / 1200
    err = np.abs(w.states_at(t)[:, 0] - ref[:, 0])
    assert err.max() < 1e-5
    # the K=3 series has already left the band at 0.04 s
    assert abs(smib_window(smib, 3).states_at(0.04)[0] - ref[48, 0]) > 1e-5


def test_validation():
    with pytest.raises(ValueError):
        SMIBSystem(H=0.0)
    with pytest.raises(ValueError):
        smib_window(SMIBSystem(), 0)
