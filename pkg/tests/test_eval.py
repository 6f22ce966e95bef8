import io
import math
import random

import pytest

from gaitprox.eval import (EvalInputError, Interval, detection_intervals, duration_accuracy,
                           empty_segments, evaluate, evaluate_corpus, false_alarm_rate,
                           instance_accuracy, match_events, read_ground_truth,
                           responsiveness, write_ground_truth)
from gaitprox.fsm import DetectionEvent, EventKind, ProximityState as S
from gaitprox.synth import GroundTruthEvent


def enter(t):
    return DetectionEvent(EventKind.NEAR_ENTERED, t, S.APPROACHING, S.NEAR)


def leave(t):
    return DetectionEvent(EventKind.NEAR_EXITED, t, S.LEAVING, S.FARAWAY)


def events_for(intervals):
    out = []
    for a, b in intervals:
        out += [enter(a), leave(b)]
    return out


GT10 = [GroundTruthEvent(20.0 * i + 5, 20.0 * i + 15) for i in range(10)]


def test_detection_intervals_pairing():
    iv = detection_intervals([enter(1), leave(3), enter(5)])
    assert iv[0] == Interval(1, 3)
    assert iv[1].start == 5 and not iv[1].closed
    with pytest.raises(EvalInputError):
        detection_intervals([enter(1), enter(2)])
    with pytest.raises(EvalInputError):
        detection_intervals([leave(1)])


def test_match_identical():
    gt = [Interval(g.enter_t, g.exit_t) for g in GT10]
    pairs = match_events(gt, gt)
    assert pairs == [(i, i) for i in range(10)]


def test_match_none():
    assert match_events([], [Interval(0, 1)]) == []


def test_match_jittered():
    rng = random.Random(0)
    gt = [Interval(g.enter_t, g.exit_t) for g in GT10]
    det = [Interval(i.start + rng.uniform(-1, 1), i.end + rng.uniform(-1, 1)) for i in gt]
    assert len(match_events(det, gt)) == 10


def test_match_is_one_to_one_and_order_independent():
    gt = [Interval(0, 10), Interval(12, 20)]
    det = [Interval(5, 15)]          # overlaps both; may claim only one
    assert match_events(det, gt) == [(0, 0)]
    det2 = [Interval(13, 14), Interval(1, 2)]
    assert match_events(det2, gt) == match_events(sorted(det2, key=lambda i: i.start), gt)


def test_overlapping_detections_rejected():
    with pytest.raises(EvalInputError):
        match_events([Interval(0, 5), Interval(4, 6)], [])


def test_instance_accuracy_fixture_arithmetic():
    assert instance_accuracy(range(234), 253) == pytest.approx(0.925, abs=5e-4)
    assert round(instance_accuracy(range(234), 253), 3) == 0.925
    assert instance_accuracy(range(5), 5) == 1.0
    assert instance_accuracy([], 0) is None


def test_instance_accuracy_with_two_misses():
    gt = [GroundTruthEvent(20.0 * i + 5, 20.0 * i + 15) for i in range(20)]
    det = events_for([(g.enter_t + 0.5, g.exit_t) for k, g in enumerate(gt) if k not in (3, 11)])
    rep = evaluate(det, gt, (0, 400))
    assert rep.ia == pytest.approx(0.90)


def test_duration_accuracy_rules():
    g = Interval(10, 70)
    assert duration_accuracy(Interval(10, 70), g) == 1.0
    assert duration_accuracy(Interval(0, 100), g) == 1.0
    assert duration_accuracy(Interval(10, 69.3), g) == pytest.approx(59.3 / 60)
    assert round(duration_accuracy(Interval(10, 69.3), g), 4) == 0.9883
    assert duration_accuracy(Interval(10, math.inf), g) is None
    assert duration_accuracy(Interval(10, 20), Interval(5, 5)) is None


def test_duration_accuracy_clip_invariance():
    g = Interval(10, 70)
    base = duration_accuracy(Interval(12, 70), g)
    for extra in (0.1, 5, 500):
        assert duration_accuracy(Interval(12, 70 + extra), g) == base


def test_responsiveness_sign():
    g = Interval(10, 20)
    assert responsiveness(Interval(10, 20), g) == 0
    assert responsiveness(Interval(10.825, 20), g) == pytest.approx(0.825)
    assert responsiveness(Interval(9.8, 20), g) == pytest.approx(-0.2)


def test_false_alarm_arithmetic():
    assert round(false_alarm_rate(3, 269), 4) == 0.0112
    assert false_alarm_rate(0, 10) == 0
    assert false_alarm_rate(1, 10) == 0.1
    assert false_alarm_rate(1, 0) is None


def test_empty_segments():
    segs = empty_segments([Interval(5, 10), Interval(20, 30)], (0, 40))
    assert segs == [Interval(0, 5), Interval(10, 20), Interval(30, 40)]
    assert empty_segments([], (0, 40)) == [Interval(0, 40)]


def test_spurious_detection_counted():
    gt = GT10
    det = events_for([(g.enter_t, g.exit_t) for g in gt] + [(16, 17)])
    rep = evaluate(sorted(det, key=lambda e: e.t), gt, (0, 200))
    assert rep.num_empty == 11
    assert rep.num_false == 1 and rep.fa == pytest.approx(1 / 11)


def test_oracle_detections_score_perfectly():
    rep = evaluate(events_for([(g.enter_t, g.exit_t) for g in GT10]), GT10, (0, 200))
    assert (rep.ia, rep.da, rep.tau_mean, rep.fa) == (1.0, 1.0, 0.0, 0.0)
    assert rep.matched_pairs == [(i, i) for i in range(10)]


def test_open_detection_counts_for_ia_not_da():
    gt = [GroundTruthEvent(5, 15)]
    rep = evaluate([enter(6)], gt, (0, 20))
    assert rep.ia == 1.0 and rep.da is None and rep.tau_per_event == [1.0]


def test_metrics_bounded_and_permutation_invariant():
    rng = random.Random(3)
    for _ in range(50):
        det = sorted({round(rng.uniform(0, 200), 1) for _ in range(8)})
        det = det[:len(det) // 2 * 2]
        pairs = list(zip(det[::2], det[1::2]))
        evs = events_for(pairs)
        shuffled = evs[:]
        rng.shuffle(shuffled)
        gt = GT10[:]
        rng.shuffle(gt)
        a = evaluate(evs, GT10, (0, 200))
        b = evaluate(shuffled, gt, (0, 200))
        assert (a.ia, a.da, a.fa, a.tau_mean) == (b.ia, b.da, b.fa, b.tau_mean)
        for x in (a.ia, a.da, a.fa):
            assert x is None or 0 <= x <= 1


def test_corpus_pooling():
    one = ([enter(6), leave(14)], [GroundTruthEvent(5, 15)], (0, 20))
    miss = ([], [GroundTruthEvent(5, 15)], (0, 20))
    rep = evaluate_corpus([one, miss])
    assert rep.ia == 0.5 and rep.num_gt == 2
    assert rep.matched_pairs == [(0, 0)]


def test_report_outputs():
    rep = evaluate(events_for([(5.5, 15)]), [GroundTruthEvent(5, 15)], (0, 30))
    assert '"ia": 1.0' in rep.to_json()
    table = rep.table()
    assert "IA" in table and "100.00%" in table


def test_ground_truth_sidecar_roundtrip():
    buf = io.StringIO()
    write_ground_truth(buf, GT10[:2], (0.0, 50.0))
    buf.seek(0)
    gt, span = read_ground_truth(buf)
    assert gt == GT10[:2] and span == (0.0, 50.0)
    with pytest.raises(EvalInputError):
        read_ground_truth(io.StringIO('{"enter_t": 1}\n'))
