import math

import numpy as np
import pytest

from dtmsim.tuning import (
    CSV_COLUMNS,
    CostReport,
    CostRow,
    TuningGrid,
    ToleranceUnreachable,
    error_map,
    max_window,
    optimal_order,
    running_error,
    tuning_grid,
    window_cost,
)


def test_probes_start_at_and_after_clearing(model39, probes39):
    assert len(probes39) == 7
    assert all(p.stage == "post" for p in probes39)
    assert probes39[0].offsets[0] == pytest.approx(1 / 1200)
    assert probes39[0].reference.shape == (720, 10, 4)


def test_running_error_is_monotone(model39, probes39):
    e = running_error(model39, probes39[1], 8)
    assert np.all(np.diff(e) >= 0)


def test_unconstrained_tolerance_gives_longest_candidate(model39, probes39):
    assert max_window(model39, 12, math.inf, probes39) == pytest.approx(0.6)


def test_unreachable_tolerance(model39, probes39):
    assert max_window(model39, 2, 1e-14, probes39) is None
    with pytest.raises(ToleranceUnreachable):
        optimal_order(model39, 1e-14, [2], 6.0, probes39, t_one=lambda K, t: 1.0)
    with pytest.raises(ValueError):
        max_window(model39, 2, 1e-5, [])


def test_order_12_window_near_fifth_of_second(model39, probes39):
    t_w = max_window(model39, 12, 1e-5, probes39)
    assert 0.1 <= t_w <= 0.4


def test_grid_is_monotone(model39, probes39):
    grid = tuning_grid(model39, [4, 6, 8, 10, 12, 14], [1e-3, 1e-5, 1e-7], probes39)
    assert grid.monotonicity_violations() == []
    assert grid.lookup(12, 1e-5) == max_window(model39, 12, 1e-5, probes39)
    with pytest.raises(KeyError):
        grid.lookup(13, 1e-5)


def test_monotonicity_check_flags_drops():
    rows = [CostRow(6, 0.1, 1e-5, 0, 0, 0), CostRow(8, 0.05, 1e-5, 0, 0, 0)]
    assert len(TuningGrid(rows).monotonicity_violations()) == 1


def test_error_map_shape_and_trends(model39, probes39):
    t_w = 96 / 1200
    emap = error_map(model39, [4, 6, 8, 10], [1 / 1200, t_w, 0.2], probes39)
    assert emap.errors.shape == (4, 3)
    # higher order is better at every fixed window
    assert np.all(np.diff(emap.errors[:, 1:], axis=0) < 0)
    # about one order of magnitude from K=4 to K=6
    assert 0.5 <= math.log10(emap.errors[0, 1] / emap.errors[1, 1]) <= 1.5
    # a one-step window sits at the rounding floor
    assert emap.errors[:, 0].max() < 1e-12
    assert emap.to_csv().splitlines()[0] == "K,t_w,max_err"
    with pytest.raises(ValueError):
        error_map(model39, [4], [0.0123], probes39)


def test_constant_cost_picks_longest_window(model39, probes39):
    K, t_w, report = optimal_order(model39, 1e-5, [6, 8, 10, 12], 6.0, probes39, t_one=lambda K, t: 1e-3)
    windows = {r.K: r.t_w for r in report.rows}
    assert t_w == max(windows.values())
    assert K == min(k for k, w in windows.items() if w == t_w)


def test_horizon_does_not_change_choice(model39, probes39):
    cost = lambda K, t: 1e-4 * K  # noqa: E731
    a = optimal_order(model39, 1e-5, range(4, 15, 2), 6.0, probes39, t_one=cost)
    b = optimal_order(model39, 1e-5, range(4, 15, 2), 12.0, probes39, t_one=cost)
    assert a[:2] == b[:2]
    assert b[2].best().t_total == pytest.approx(2 * a[2].best().t_total)


def test_ties_go_to_smaller_order():
    report = CostReport([CostRow(10, 0.1, 1e-5, 0, 1.0, 5.0), CostRow(8, 0.1, 1e-5, 0, 1.0, 5.0)])
    assert report.best().K == 8


def test_measured_cost_report(model39, probes39):
    K, t_w, report = optimal_order(model39, 1e-5, [6, 12], 6.0, probes39, repeats=3)
    assert K in (6, 12)
    lines = report.to_csv().splitlines()
    assert tuple(lines[0].split(",")) == CSV_COLUMNS
    assert len(lines) == 3
    for r in report.rows:
        assert r.t_one > 0 and r.t_total == pytest.approx(r.t_one * 6.0 / r.t_w)
        assert r.max_err <= 1e-5


def test_window_cost_is_positive(model39):
    assert window_cost(model39, 6, 0.05, repeats=3) > 0
    with pytest.raises(ValueError):
        window_cost(model39, 6, 0.05, repeats=0)
