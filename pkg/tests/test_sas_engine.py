from dataclasses import replace

import numpy as np
import pytest

from dtmsim.model import StagedNetwork, algebraic_arrays, state_derivative
from dtmsim.model.machine import ALGEBRAIC_NAMES, STATE_NAMES, array_to_states
from dtmsim.reference_rk4 import rk4_integrate
from dtmsim.sas_engine import (
    CoefficientPool,
    SeriesDivergence,
    SimConfig,
    Trajectory,
    build_window,
    evaluate_window,
    parallel_build_window,
    sample_times,
    simulate,
    window_boundaries,
)


@pytest.fixture(scope="module")
def swing_state(model39, rk4_run):
    """A strongly disturbed state shortly after clearing."""
    return rk4_run.states[int(round(1.2 * 1200))]


@pytest.fixture(scope="module")
def unfaulted(model39):
    return replace(model39, network=StagedNetwork.constant(model39.network.y_pre))


def test_equilibrium_has_no_higher_coefficients(model39):
    w = build_window(model39.initial_state, model39, "pre", 12, window=0.2)
    assert np.abs(w.phi[1:]).max() <= 1e-10
    assert np.array_equal(w.phi[0], model39.initial_state)


def test_window_matches_fine_integration(model39, swing_state):
    y = model39.network.matrix("post")
    w = build_window(swing_state, model39, "post", 14)
    f = lambda x: state_derivative(x, y, model39.arrays, model39.omega_s)  # noqa: E731
    ref = rk4_integrate(f, swing_state, 0.05 / 400, 400)
    assert np.abs(w.states_at(0.05) - ref[-1]).max() < 1e-10


def test_algebraic_series_match_pointwise_algebra(model39, swing_state):
    y = model39.network.matrix("post")
    w = build_window(swing_state, model39, "post", 14)
    for t in (0.0, 0.02, 0.05):
        point = algebraic_arrays(w.states_at(t), y, model39.arrays)
        series = w.algebraic_at(t)
        for j, name in enumerate(ALGEBRAIC_NAMES):
            assert np.abs(series[:, j] - point[name]).max() < 1e-9, name


def test_derivative_consistency(model39, swing_state):
    w = build_window(swing_state, model39, "fault", 12)
    k = np.arange(w.order)
    lhs = (k + 1)[:, None] * w.phi[1:, :, 0]
    rhs = model39.omega_s * w.phi[:-1, :, 1]
    assert np.abs(lhs - rhs).max() <= 1e-10


def test_lower_coefficients_do_not_depend_on_order(model39, swing_state):
    low = build_window(swing_state, model39, "post", 8)
    high = build_window(swing_state, model39, "post", 16)
    assert np.array_equal(low.phi, high.phi[:9])
    assert np.array_equal(low.psi, high.psi[:9])
    assert np.array_equal(low.trig, high.trig[:9])


def test_series_views(model39, swing_state):
    w = build_window(swing_state, model39, "post", 6)
    assert w.order == 6 and w.n == 10
    s = w.state_series(3, "omega")
    assert s.order == 6 and s[0] == swing_state[3, 1]
    assert set(w.machine_series(0)) == set(STATE_NAMES)
    pair = w.trig_pair(2)
    assert pair.sin_series[0] == pytest.approx(np.sin(swing_state[2, 0]))
    assert w.algebraic_series(1, "P_e")[0] == w.psi[0, 1, ALGEBRAIC_NAMES.index("P_e")]


def test_evaluate_window(model39, swing_state):
    w = build_window(swing_state, model39, "post", 10)
    states, algs = evaluate_window(w, 0.0)
    assert np.array_equal(np.array([s.as_array() for s in states]), swing_state)
    assert len(algs) == 10
    with pytest.raises(ValueError):
        evaluate_window(w, -0.1)


def test_build_accepts_machine_state_objects(model39):
    a = build_window(array_to_states(model39.initial_state), model39, "fault", 5)
    b = build_window(model39.initial_state, model39, "fault", 5)
    assert np.array_equal(a.phi, b.phi)


def test_build_input_validation(model39):
    with pytest.raises(ValueError):
        build_window(model39.initial_state[:3], model39, "pre", 5)
    with pytest.raises(ValueError):
        build_window(model39.initial_state, model39, "pre", 0)
    bad = model39.initial_state.copy()
    bad[0, 0] = np.nan
    with pytest.raises(SeriesDivergence):
        build_window(bad, model39, "pre", 5)


def test_blow_up_detected(model39, swing_state):
    with pytest.raises(SeriesDivergence):
        build_window(swing_state, model39, "post", 20, window=3.0)


def test_simulate_tags_divergence_with_window(model39):
    with pytest.raises(SeriesDivergence) as exc:
        simulate(model39, SimConfig(order=20, window=3.0, duration=6.0))
    assert exc.value.window is not None and exc.value.time is not None


@pytest.mark.parametrize("workers", [1, 4, 40])
def test_parallel_build_is_identical(model39, swing_state, workers):
    seq = build_window(swing_state, model39, "post", 12)
    par = parallel_build_window(swing_state, model39, "post", 12, workers=workers)
    assert np.array_equal(seq.phi, par.phi)
    assert np.array_equal(seq.psi, par.psi)
    assert np.array_equal(seq.trig, par.trig)


def test_pool_can_be_reused(model39, swing_state):
    with CoefficientPool(3) as pool:
        a = parallel_build_window(swing_state, model39, "fault", 6, pool=pool)
        b = parallel_build_window(swing_state, model39, "fault", 6, pool=pool)
    assert np.array_equal(a.phi, b.phi)
    with pytest.raises(ValueError):
        CoefficientPool(0)


def test_pool_chunks_cover_all_machines():
    pool = CoefficientPool(40)
    try:
        for n in (1, 3, 10):
            for units in (1, 2, 4):
                chunks = pool.chunks(n, units)
                covered = [i for sl in chunks for i in range(sl.start, sl.stop)]
                assert covered == list(range(n))
    finally:
        pool.close()


def test_window_boundaries():
    b = window_boundaries(6.0, 0.2)
    assert len(b) == 31 and b[0] == 0.0 and b[-1] == 6.0
    ev = window_boundaries(6.0, 0.2, (1.0, 1.0 + 5 / 60))
    assert len(ev) == 32
    assert 1.0 in ev and (1.0 + 5 / 60) in ev
    short = window_boundaries(1.0, 0.3)
    assert short[-1] == 1.0 and len(short) == 5


def test_sample_times():
    t = sample_times(6.0, 1 / 1200)
    assert t.size == 7201 and t[-1] == pytest.approx(6.0)
    assert sample_times(1.0, 0.3)[-1] == 1.0


def test_flat_run_without_fault(unfaulted):
    tr = simulate(unfaulted, SimConfig(order=12, window=0.2, duration=6.0))
    assert np.abs(tr.states - unfaulted.initial_state).max() <= 1e-8


def test_windows_chain_exactly(dtm_run):
    w = dtm_run.windows
    for a, b, (t0, t1) in zip(w[:-1], w[1:], zip(dtm_run.boundaries[:-2], dtm_run.boundaries[1:-1])):
        assert np.array_equal(b.phi[0], a.states_at(t1 - t0))
        assert b.anchor_time == t1


def test_stages_follow_events(dtm_run):
    stages = [w.stage for w in dtm_run.windows]
    assert stages.count("fault") == 1
    assert stages[:5] == ["pre"] * 5 and stages[-1] == "post"


def test_run_records_timing(dtm_run):
    assert dtm_run.window_seconds.shape == (dtm_run.n_windows,)
    assert np.all(dtm_run.window_seconds > 0)
    assert dtm_run.wall_seconds >= dtm_run.window_seconds.sum() * 0.5


def test_pointwise_and_series_power_agree(model39):
    cfg = SimConfig(order=12, window=0.1, duration=2.0)
    series = simulate(model39, cfg)
    point = simulate(model39, replace(cfg, algebraic="pointwise"))
    assert np.array_equal(series.states, point.states)
    # the power series is truncated at the same order as the states
    assert np.abs(series.p_e - point.p_e).max() < 1e-5 * np.abs(point.p_e).max()
    assert np.abs(series.p_e[0] - point.p_e[0]).max() < 1e-12


def test_parallel_simulation_matches(model39):
    cfg = SimConfig(order=8, window=0.1, duration=1.5)
    seq = simulate(model39, cfg)
    par = simulate(model39, replace(cfg, parallel=True, workers=4))
    assert np.array_equal(seq.states, par.states)


def test_sim_config_validation():
    for bad in (dict(order=0), dict(window=0.0), dict(window=7.0), dict(step=0.5),
                dict(algebraic="cached"), dict(workers=0)):
        with pytest.raises(ValueError):
            SimConfig(**bad)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 1.0]), np.zeros((3, 1, 4)))
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 1, 4)))
