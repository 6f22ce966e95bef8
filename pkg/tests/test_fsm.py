import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitprox.features import FeatureSample
from gaitprox.fsm import (ConfigError, DetectionEvent, EventKind, FsmConfig, ProximityFsm,
                          ProximityState, StreamError, read_events, run_detector,
                          write_events, write_state_trace)

S = ProximityState
CFG = FsmConfig()  # near 0.65, far 0.45, gait 0.05, slope 0.02, debounce 5, timeout 10 s
DT = 0.1


class Script:
    """Build a feature stream at 10 Hz from labelled segments."""

    def __init__(self):
        self.samples = []

    def add(self, n, fp=0.1, fs=0.0, fg=0.0):
        t0 = len(self.samples) * DT
        self.samples += [FeatureSample(round(t0 + i * DT, 6), fp, fs, 1.3 if fg else 0.0,
                                       1.0 if fg else 0.0, fg)
                         for i in range(n)]
        return len(self.samples) - n  # index of the segment's first sample

    def t(self, i):
        return self.samples[i].t


def states(samples, cfg=CFG):
    trace = []
    events = run_detector(samples, cfg, trace)
    return events, [s for _, s in trace]


def approach(sc, fp=0.3):
    return sc.add(20, fp=fp, fs=0.1, fg=0.3)


def full_cycle(sc):
    approach(sc)
    enter = sc.add(10, fp=0.8)
    sc.add(30, fp=0.3)          # quasi-static dwell, fp low, no gait
    sc.add(10, fp=0.5, fs=-0.1, fg=0.3)
    leave = sc.add(10, fp=0.2, fs=-0.1, fg=0.3)
    return enter, leave


def test_faraway_stays_on_zero_features():
    sc = Script()
    sc.add(1000, fp=0.0)
    events, st_ = states(sc.samples)
    assert events == [] and set(st_) == {S.FARAWAY}


def test_full_cycle_events_and_timestamps():
    sc = Script()
    enter, leave = full_cycle(sc)
    events, st_ = states(sc.samples)
    assert [e.kind for e in events] == [EventKind.NEAR_ENTERED, EventKind.NEAR_EXITED]
    assert events[0].t == sc.t(enter)   # first sample of the debounced run
    assert events[1].t == sc.t(leave)
    assert events[0].state_before is S.APPROACHING and events[0].state_after is S.NEAR
    assert events[1].state_before is S.LEAVING and events[1].state_after is S.FARAWAY
    visited = [s for i, s in enumerate(st_) if i == 0 or s != st_[i - 1]]
    assert visited == [S.FARAWAY, S.APPROACHING, S.NEAR, S.LEAVING, S.FARAWAY]


def test_approach_needs_both_slope_and_gait():
    for fs, fg in ((0.1, 0.0), (0.0, 0.3), (0.02, 0.3), (0.1, 0.05)):
        sc = Script()
        sc.add(50, fp=0.3, fs=fs, fg=fg)
        assert set(states(sc.samples)[1]) == {S.FARAWAY}, (fs, fg)


def test_debounce_requires_consecutive_samples():
    sc = Script()
    for _ in range(10):
        sc.add(4, fp=0.3, fs=0.1, fg=0.3)
        sc.add(1, fp=0.3)
    assert set(states(sc.samples)[1]) == {S.FARAWAY}
    sc.add(5, fp=0.3, fs=0.1, fg=0.3)
    assert states(sc.samples)[1][-1] is S.APPROACHING


def test_debounce_one_fires_immediately():
    sc = Script()
    sc.add(1, fp=0.3, fs=0.1, fg=0.3)
    assert states(sc.samples, FsmConfig(debounce=1))[1] == [S.APPROACHING]


def test_near_entry_on_fp_threshold_inclusive():
    sc = Script()
    approach(sc)
    i = sc.add(5, fp=0.65)
    events, _ = states(sc.samples)
    assert len(events) == 1 and events[0].t == sc.t(i)


def test_approach_timeout_back_to_faraway():
    sc = Script()
    approach(sc)
    quiet = sc.add(99, fp=0.3)
    events, st_ = states(sc.samples)
    assert st_[-1] is S.APPROACHING  # 9.8 s of quiet, not yet 10 s
    sc.add(5, fp=0.3)
    events, st_ = states(sc.samples)
    assert st_[-1] is S.FARAWAY and events == []
    assert st_.index(S.FARAWAY, quiet) == quiet + 100


def test_approach_timeout_reset_by_gait():
    sc = Script()
    approach(sc)
    sc.add(60, fp=0.3)
    sc.add(1, fp=0.3, fs=0.1, fg=0.3)
    sc.add(60, fp=0.3)
    assert states(sc.samples)[1][-1] is S.APPROACHING


def test_near_is_stable_without_gait():
    sc = Script()
    approach(sc)
    sc.add(10, fp=0.8)
    sc.add(600, fp=0.05, fs=-0.5)   # 60 s of low fp, falling slope, no gait
    events, st_ = states(sc.samples)
    assert [e.kind for e in events] == [EventKind.NEAR_ENTERED]
    assert st_[-1] is S.NEAR


def test_leaving_requires_negative_slope_and_gait():
    sc = Script()
    approach(sc)
    sc.add(10, fp=0.8)
    sc.add(50, fp=0.5, fs=0.1, fg=0.3)   # walking about but fp not falling
    assert states(sc.samples)[1][-1] is S.NEAR
    sc.add(5, fp=0.5, fs=-0.1, fg=0.3)
    assert states(sc.samples)[1][-1] is S.LEAVING


def test_leaving_aborts_back_to_near():
    sc = Script()
    approach(sc)
    sc.add(10, fp=0.8)
    sc.add(5, fp=0.6, fs=-0.1, fg=0.3)
    sc.add(5, fp=0.7)
    events, st_ = states(sc.samples)
    assert st_[-1] is S.NEAR
    assert [e.kind for e in events] == [EventKind.NEAR_ENTERED]


def test_leaving_does_not_abort_while_walking():
    sc = Script()
    approach(sc)
    sc.add(10, fp=0.8)
    sc.add(5, fp=0.6, fs=-0.1, fg=0.3)
    sc.add(20, fp=0.7, fg=0.3)
    assert states(sc.samples)[1][-1] is S.LEAVING


def test_exit_threshold_inclusive_and_hysteresis():
    sc = Script()
    approach(sc)
    sc.add(10, fp=0.8)
    sc.add(5, fp=0.6, fs=-0.1, fg=0.3)
    sc.add(20, fp=0.46)                   # between thresholds: stays Leaving
    assert states(sc.samples)[1][-1] is S.LEAVING
    i = sc.add(5, fp=0.45)
    events, st_ = states(sc.samples)
    assert st_[-1] is S.FARAWAY and events[-1].t == sc.t(i)


def test_two_cycles_alternate():
    sc = Script()
    full_cycle(sc)
    sc.add(30, fp=0.1)
    full_cycle(sc)
    events, _ = states(sc.samples)
    assert [e.kind.value for e in events] == ["NearEntered", "NearExited"] * 2


def test_out_of_order_sample_rejected():
    fsm = ProximityFsm()
    fsm.step(FeatureSample(1.0, 0.1))
    with pytest.raises(StreamError):
        fsm.step(FeatureSample(0.5, 0.1))
    with pytest.raises(StreamError):
        fsm.step(FeatureSample(2.0, float("nan")))


def test_dwell_counter_resets():
    fsm = ProximityFsm(FsmConfig(debounce=1))
    fsm.step(FeatureSample(0.0, 0.1))
    fsm.step(FeatureSample(0.1, 0.1))
    assert fsm.dwell == 2 and fsm.state is S.FARAWAY
    fsm.step(FeatureSample(0.2, 0.1, 0.1, 1.3, 1.0, 0.3))
    assert fsm.state is S.APPROACHING and fsm.dwell == 0


def test_empty_stream():
    assert run_detector([]) == []


def test_config_validation_lists_violations():
    with pytest.raises(ConfigError) as e:
        FsmConfig(theta_near=0.4, theta_far=0.5, debounce=0).validate()
    assert len(e.value.violations) == 2
    with pytest.raises(ConfigError):
        FsmConfig(theta_gait=float("inf")).validate()


def test_event_json_roundtrip_and_state_trace():
    ev = [DetectionEvent(EventKind.NEAR_ENTERED, 1.5, S.APPROACHING, S.NEAR),
          DetectionEvent(EventKind.NEAR_EXITED, 9.25, S.LEAVING, S.FARAWAY)]
    buf = io.StringIO()
    write_events(buf, ev)
    buf.seek(0)
    assert read_events(buf) == ev
    out = io.StringIO()
    write_state_trace(out, [(0.0, S.FARAWAY), (0.1, S.APPROACHING)])
    assert out.getvalue() == "t,state\n0.000000,Faraway\n0.100000,Approaching\n"


feature = st.builds(lambda fp, fs, fg: (fp, fs, fg),
                    st.floats(-0.2, 1.0), st.floats(-0.3, 0.3),
                    st.sampled_from([0.0, 0.0, 0.01, 0.2, 0.5]))


@settings(max_examples=150, deadline=None)
@given(st.lists(feature, max_size=400))
def test_alternation_and_determinism(raw):
    samples = [FeatureSample(i * DT, fp, fs, 0.0, 1.0, fg)
               for i, (fp, fs, fg) in enumerate(raw)]
    t1, t2 = [], []
    a = run_detector(samples, CFG, t1)
    b = run_detector(samples, CFG, t2)
    assert a == b and t1 == t2
    kinds = [e.kind for e in a]
    assert all(k is (EventKind.NEAR_ENTERED if i % 2 == 0 else EventKind.NEAR_EXITED)
               for i, k in enumerate(kinds))
    for e in a:
        assert (e.state_before, e.state_after) in {(S.APPROACHING, S.NEAR),
                                                   (S.LEAVING, S.FARAWAY)}


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-0.2, 1.0), st.floats(-0.5, 0.5)), max_size=300))
def test_no_exit_after_entry_without_gait(suffix):
    sc = Script()
    approach(sc)
    sc.add(5, fp=0.8)
    t0 = len(sc.samples) * DT
    tail = [FeatureSample(t0 + i * DT, fp, fs, 0.0, 0.0, 0.0)
            for i, (fp, fs) in enumerate(suffix)]
    events = run_detector(sc.samples + tail)
    assert [e.kind for e in events] == [EventKind.NEAR_ENTERED]
