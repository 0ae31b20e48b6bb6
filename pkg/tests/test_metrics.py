import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from convoykit.errors import EmptyInputError, IncompleteSweepError, MalformedTraceError
from convoykit.metrics import (
    MetricSeries, RunMetrics, percentile_95, platooning_error, run_metrics, series_to_csv,
    speed_difference, steady_state_mask, sweep_aggregate,
)
from convoykit.sim import Trace, TraceRow, VehicleTick


def build_trace(speeds, gaps=None, dt=0.05):
    """speeds: rows x vehicles; gaps: rows x followers."""
    rows = []
    for k, sp in enumerate(speeds):
        ticks = []
        for i, v in enumerate(sp):
            gap = None if gaps is None or i == 0 else gaps[k][i - 1]
            ticks.append(VehicleTick(0.0, -15.0 * i, v, 0.0, v, 0.0, gap))
        rows.append(TraceRow(k * dt, tuple(ticks)))
    return Trace(len(speeds[0]), rows)


@pytest.mark.parametrize("gap,expected", [(15.0, 0.0), (17.3, 2.3), (12.0, 3.0)])
def test_platooning_error_examples(gap, expected):
    trace = build_trace([[1.0, 1.0]], [[gap]])
    (err,) = platooning_error(trace, 15.0)
    assert err.values[0] == pytest.approx(expected, abs=1e-12)


def test_platooning_error_one_series_per_follower():
    trace = build_trace([[1, 1, 1], [1, 1, 1]], [[15, 16], [14, 15]])
    errs = platooning_error(trace, 15.0)
    assert [e.label for e in errs] == ["v1_platooning_error_m", "v2_platooning_error_m"]
    assert errs[0].values.tolist() == [0.0, 1.0]
    assert errs[1].values.tolist() == [1.0, 0.0]


def test_p95_one_to_hundred():
    assert percentile_95(np.arange(1, 101)) == 95.0


def test_p95_constant_and_single():
    assert percentile_95([2.5] * 37) == 2.5
    assert percentile_95([7.0]) == 7.0


def test_p95_small_n_rank():
    # n=10: ceil(9.5) = 10 -> the maximum
    assert percentile_95(list(range(10))) == 9
    # n=20: ceil(19) = 19 -> second largest
    assert percentile_95(list(range(20))) == 18


def test_p95_empty():
    with pytest.raises(EmptyInputError):
        percentile_95([])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=300))
def test_p95_matches_sorting_oracle(values):
    ordered = sorted(values)
    k = math.ceil(0.95 * len(values) - 1e-12)
    assert percentile_95(values) == ordered[k - 1]
    assert percentile_95(values) in values


def test_speed_difference_example():
    sd = speed_difference(build_trace([[1.0, 1.2, 0.8]], [[15, 15]]))
    assert sd.values[0] == pytest.approx(0.4)


def test_speed_difference_equal_and_single():
    assert speed_difference(build_trace([[1.5, 1.5, 1.5]], [[15, 15]])).values[0] == 0.0
    assert speed_difference(build_trace([[1.5]])).values[0] == 0.0


@given(st.lists(st.floats(0, 3), min_size=2, max_size=8), st.randoms())
def test_speed_difference_permutation_invariant(speeds, rnd):
    shuffled = speeds[:]
    rnd.shuffle(shuffled)
    a = speed_difference(build_trace([speeds])).values[0]
    b = speed_difference(build_trace([shuffled])).values[0]
    assert a == b >= 0


def test_metrics_reject_empty_trace():
    with pytest.raises(EmptyInputError):
        speed_difference(Trace(3, []))
    with pytest.raises(EmptyInputError):
        platooning_error(Trace(3, []))


def test_series_validation():
    with pytest.raises(MalformedTraceError):
        MetricSeries(np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(MalformedTraceError):
        MetricSeries(np.array([1.0, 0.0]), np.array([1.0, 2.0]))


def test_steady_state_mask():
    t = np.arange(0, 40, 5.0)
    mask = steady_state_mask(t, [0.0, 20.0], settle=10.0)
    assert t[mask].tolist() == [10.0, 15.0, 30.0, 35.0]


def test_run_metrics():
    trace = build_trace([[1.0, 1.2, 0.8], [1.0, 1.0, 1.0]], [[15, 16], [15, 17]])
    m = run_metrics(trace, 15.0)
    assert m.mean_speed_difference == pytest.approx(0.2)
    assert m.p95_platooning_error == (0.0, 2.0)
    assert m.p95_worst == 2.0


def test_sweep_identity_single_seed():
    m = RunMetrics(0.3, (0.5, 0.7))
    summary = sweep_aggregate({(0.0, 1): m})
    (row,) = summary.rows
    assert (row.per, row.mean_speed_difference, row.p95_platooning_error, row.seeds) == (0.0, 0.3, 0.7, 1)


def test_sweep_two_seed_mean_and_order():
    runs = {
        (0.2, 1): RunMetrics(0.4, (1.0, 2.0)),
        (0.2, 2): RunMetrics(0.6, (3.0, 1.0)),
        (0.0, 1): RunMetrics(0.1, (0.1, 0.2)),
        (0.0, 2): RunMetrics(0.3, (0.3, 0.2)),
    }
    s = sweep_aggregate(runs, levels=[0.0, 0.2])
    assert s.per_levels == [0.0, 0.2]
    assert s.rows[1].mean_speed_difference == pytest.approx(0.5)
    assert s.rows[1].p95_platooning_error == pytest.approx(2.5)
    assert s.rows[1].p95_per_follower == pytest.approx((2.0, 1.5))
    assert s.seeds == (1, 2)
    assert s.trend() == pytest.approx((1.0, 1.0))


def test_sweep_incomplete():
    with pytest.raises(IncompleteSweepError):
        sweep_aggregate({})
    with pytest.raises(IncompleteSweepError):
        sweep_aggregate({(0.0, 1): RunMetrics(0.1, (0.1,))}, levels=[0.0, 0.1])


def test_sweep_csv_layout():
    s = sweep_aggregate({(0.1, 1): RunMetrics(0.25, (0.5, 0.75))})
    lines = s.to_csv().splitlines()
    assert lines[0] == "# schema=1"
    assert lines[1].startswith("per,mean_speed_difference_mps,p95_platooning_error_m,seeds")
    assert lines[2] == "0.1,0.25,0.75,1,0.5,0.75"


def test_series_csv():
    s = MetricSeries(np.array([0.0, 0.05]), np.array([1.0, 2.0]), "x")
    assert series_to_csv([s]).splitlines() == ["# schema=1", "t_s,x", "0.0,1.0", "0.05,2.0"]
