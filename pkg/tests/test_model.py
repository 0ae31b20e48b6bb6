import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_state
from convoykit.errors import InvalidInputError
from convoykit.model import ConvoyConfig, StateStore, VehicleState
from convoykit.policy import rx_gate_all_predecessor


def never(ego, sender):
    return 0


def always(ego, sender):
    return 1


def test_vehicle_state_invariants():
    with pytest.raises(InvalidInputError):
        make_state(speed=-0.1)
    with pytest.raises(InvalidInputError):
        make_state(heading=2 * math.pi)
    with pytest.raises(InvalidInputError):
        make_state(vid=256)
    with pytest.raises(InvalidInputError):
        make_state(accel=math.inf)


def test_convoy_config_defaults_and_validation():
    cfg = ConvoyConfig(vehicle_count=3, ego_index=2)
    assert cfg.desired_gap == 15.0
    assert cfg.staleness_horizon == pytest.approx(0.3)
    assert cfg.buffer_depth == 10
    for bad in (dict(ego_index=3), dict(desired_gap=0), dict(broadcast_period=0), dict(buffer_depth=0)):
        with pytest.raises(InvalidInputError):
            ConvoyConfig(vehicle_count=3, **bad)


def test_insert_from_predecessor_accepted():
    store = StateStore(2, own_state=make_state(vid=2))
    assert store.insert(make_state(vid=1, t_us=1_050_000), rx_gate_all_predecessor)


def test_insert_from_successor_rejected():
    store = StateStore(1, own_state=make_state(vid=1))
    before = store.snapshot()
    assert not store.insert(make_state(vid=2, t_us=1_050_000), rx_gate_all_predecessor)
    assert store.snapshot() == before
    assert store.rejected_gate == 1


def test_duplicate_sequence_rejected_store_unchanged():
    store = StateStore(2, own_state=make_state(vid=2))
    s = make_state(vid=0, t_us=1_100_000)
    assert store.insert(s, rx_gate_all_predecessor)
    before = store.snapshot()
    assert not store.insert(s, rx_gate_all_predecessor)
    assert store.snapshot() == before
    assert store.rejected_stale == 1


def test_out_of_order_rejected():
    store = StateStore(1)
    assert store.insert(make_state(vid=0, t_us=2_000_000, seq=5), rx_gate_all_predecessor)
    assert not store.insert(make_state(vid=0, t_us=1_900_000, seq=4), rx_gate_all_predecessor)
    assert store.latest(0).sequence == 5


def test_latest_returns_newest():
    store = StateStore(1, own_state=make_state(vid=1, t_us=3_000_000))
    for t in (1, 2, 3):
        store.insert(make_state(vid=0, t_us=t * 1_000_000), rx_gate_all_predecessor)
    assert store.latest(0).timestamp_us == 3_000_000


def test_latest_empty_is_none():
    assert StateStore(1).latest(0) is None


def test_latest_stale_is_none():
    store = StateStore(1, staleness_horizon=0.3, own_state=make_state(vid=1, t_us=1_000_000))
    store.insert(make_state(vid=0, t_us=1_000_000), rx_gate_all_predecessor)
    assert store.latest(0) is not None
    # advance the ego clock to exactly the horizon: no longer younger than it
    store.update_own(make_state(vid=1, t_us=1_300_000))
    assert store.latest(0) is None
    assert store.latest(0, now_us=1_299_999) is not None


def test_snapshot_immutable():
    store = StateStore(2, own_state=make_state(vid=2))
    snap = store.snapshot()
    store.insert(make_state(vid=0, t_us=2_000_000), rx_gate_all_predecessor)
    assert list(snap.buffers) == [2]
    with pytest.raises(TypeError):
        snap.buffers[0] = ()


def test_fresh_store_snapshot_has_only_ego():
    snap = StateStore(1, own_state=make_state(vid=1)).snapshot()
    assert list(snap.buffers) == [1]
    assert snap.own.vehicle_id == 1


def test_snapshot_preserves_insert_order():
    store = StateStore(3, buffer_depth=5, own_state=make_state(vid=3))
    for t in range(1, 4):
        store.insert(make_state(vid=0, t_us=t * 1_000_000), rx_gate_all_predecessor)
    buf = store.snapshot().buffers[0]
    assert [s.timestamp_us for s in buf] == [1_000_000, 2_000_000, 3_000_000]


def test_own_state_must_match_id():
    with pytest.raises(InvalidInputError):
        StateStore(1, own_state=make_state(vid=0))


def test_origin_anchored_on_first_accepted():
    store = StateStore(2, own_state=make_state(vid=2, north=-30))
    assert store.origin is None
    first = make_state(vid=0, t_us=2_000_000, north=5.0)
    store.insert(first, rx_gate_all_predecessor)
    store.insert(make_state(vid=1, t_us=2_000_000, north=-10.0), rx_gate_all_predecessor)
    assert store.origin == first.position


@given(st.integers(1, 12), st.integers(0, 40))
def test_buffer_depth_bound(depth, m):
    store = StateStore(1, buffer_depth=depth)
    for t in range(1, m + 1):
        assert store.insert(make_state(vid=0, t_us=t * 1000, seq=t), rx_gate_all_predecessor)
    buf = store.snapshot().buffers.get(0, ())
    assert len(buf) == min(depth, m)
    assert [s.sequence for s in buf] == list(range(max(1, m - depth + 1), m + 1))
    for a, b in zip(buf, buf[1:]):
        assert a.timestamp_us < b.timestamp_us and a.sequence < b.sequence


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(1, 10**6)), max_size=30))
def test_zero_gate_leaves_store_untouched(msgs):
    store = StateStore(2, own_state=make_state(vid=2))
    before = store.snapshot()
    for vid, t in msgs:
        store.insert(make_state(vid=vid, t_us=t), never)
    assert store.snapshot() == before


@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 50)), max_size=60))
def test_per_source_strictly_increasing(msgs):
    store = StateStore(3, buffer_depth=6)
    for vid, seq in msgs:
        store.insert(make_state(vid=vid, t_us=seq * 1000 + 1, seq=seq), always)
    for buf in store.snapshot().buffers.values():
        for a, b in zip(buf, buf[1:]):
            assert a.sequence < b.sequence and a.timestamp_us < b.timestamp_us
