"""Detection metrics against ground-truth proximity intervals.

IA  matched ground-truth events / ground-truth events
DA  mean over fully detected pairs of min(1, overlap / ground-truth length)
tau detection entry minus ground-truth entry (positive = late)
FA  detections overlapping no ground-truth event / empty segments
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence, TextIO

from .fsm import DetectionEvent, EventKind
from .synth import GroundTruthEvent


class EvalInputError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    start: float
    end: float  # math.inf while a detection is still open

    @property
    def closed(self) -> bool:
        return math.isfinite(self.end)

    def overlap(self, other: "Interval") -> float:
        return max(0.0, min(self.end, other.end) - max(self.start, other.start))

    def overlaps(self, other: "Interval") -> bool:
        return min(self.end, other.end) > max(self.start, other.start)


def detection_intervals(events: Sequence[DetectionEvent]) -> list[Interval]:
    """Pair NearEntered/NearExited events; a trailing entry stays open."""
    out = []
    start = None
    for ev in sorted(events, key=lambda e: e.t):
        if ev.kind is EventKind.NEAR_ENTERED:
            if start is not None:
                raise EvalInputError(f"two entries without an exit (t={ev.t})")
            start = ev.t
        else:
            if start is None:
                raise EvalInputError(f"exit without an entry (t={ev.t})")
            out.append(Interval(start, ev.t))
            start = None
    if start is not None:
        out.append(Interval(start, math.inf))
    return out


def gt_intervals(gt: Iterable[GroundTruthEvent]) -> list[Interval]:
    return sorted((Interval(g.enter_t, g.exit_t) for g in gt), key=lambda i: i.start)


def _check_disjoint(intervals: Sequence[Interval], what: str) -> None:
    for a, b in zip(intervals, intervals[1:]):
        if b.start < a.end:
            raise EvalInputError(f"overlapping {what} intervals at t={b.start}")


def match_events(detections: Sequence[Interval], gt: Sequence[Interval]
                 ) -> list[tuple[int, int]]:
    """Greedy one-to-one matching in time order by any overlap.

    Both inputs are sorted internally; returned indices refer to the
    sorted order. Pairs are ``(gt_index, detection_index)``.
    """
    det = sorted(detections, key=lambda i: i.start)
    ref = sorted(gt, key=lambda i: i.start)
    _check_disjoint(det, "detection")
    _check_disjoint(ref, "ground-truth")
    pairs = []
    used = set()
    for gi, g in enumerate(ref):
        for di, d in enumerate(det):
            if di not in used and d.overlaps(g):
                pairs.append((gi, di))
                used.add(di)
                break
    return pairs


def instance_accuracy(matches: Sequence, num_gt: int) -> float | None:
    """``None`` when there is no ground truth (not applicable)."""
    if num_gt == 0:
        return None
    return len(matches) / num_gt


def duration_accuracy(detection: Interval, gt: Interval) -> float | None:
    """``None`` when the pair does not qualify (open detection or empty GT)."""
    length = gt.end - gt.start
    if not detection.closed or length <= 0:
        return None
    return min(1.0, detection.overlap(gt) / length)


def responsiveness(detection: Interval, gt: Interval) -> float:
    return detection.start - gt.start


def empty_segments(gt: Sequence[Interval], span: tuple[float, float]) -> list[Interval]:
    """Gaps of ``span`` not covered by ground truth."""
    lo, hi = span
    out = []
    cur = lo
    for g in sorted(gt, key=lambda i: i.start):
        if g.start > cur:
            out.append(Interval(cur, min(g.start, hi)))
        cur = max(cur, g.end)
    if cur < hi:
        out.append(Interval(cur, hi))
    return [s for s in out if s.end > s.start]


def false_alarm_rate(false_detections: int, num_empty: int) -> float | None:
    if num_empty == 0:
        return None
    return min(1.0, false_detections / num_empty)


@dataclass
class EvalReport:
    ia: float | None
    da: float | None
    tau_mean: float | None
    tau_per_event: list = field(default_factory=list)
    fa: float | None = None
    matched_pairs: list = field(default_factory=list)
    num_gt: int = 0
    num_detections: int = 0
    num_false: int = 0
    num_empty: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def table(self) -> str:
        def pct(x):
            return "n/a" if x is None else f"{100 * x:.2f}%"
        tau = "n/a" if self.tau_mean is None else f"{self.tau_mean:.3f}s"
        rows = [("N_GT", str(self.num_gt)), ("IA", pct(self.ia)), ("DA", pct(self.da)),
                ("tau", tau), ("N_empty", str(self.num_empty)), ("FA", pct(self.fa))]
        head = " | ".join(f"{k:>8}" for k, _ in rows)
        vals = " | ".join(f"{v:>8}" for _, v in rows)
        return f"{head}\n{'-' * len(head)}\n{vals}"


@dataclass
class _Tally:
    gt: int = 0
    det: int = 0
    matched: int = 0
    false: int = 0
    empty: int = 0
    das: list = field(default_factory=list)
    taus: list = field(default_factory=list)
    pairs: list = field(default_factory=list)


def _score_one(tally: _Tally, events, gt, span, offset: int = 0) -> None:
    det = detection_intervals(events)
    ref = gt_intervals(gt)
    pairs = match_events(det, ref)
    tally.gt += len(ref)
    tally.det += len(det)
    tally.matched += len(pairs)
    tally.pairs += [(gi + offset, di) for gi, di in pairs]
    for gi, di in pairs:
        da = duration_accuracy(det[di], ref[gi])
        if da is not None:
            tally.das.append(da)
        tally.taus.append(responsiveness(det[di], ref[gi]))
    used = {di for _, di in pairs}
    tally.false += sum(1 for i, d in enumerate(det)
                       if i not in used and not any(d.overlaps(g) for g in ref))
    tally.empty += len(empty_segments(ref, span))


def _report(t: _Tally) -> EvalReport:
    return EvalReport(
        ia=instance_accuracy(range(t.matched), t.gt),
        da=sum(t.das) / len(t.das) if t.das else None,
        tau_mean=sum(abs(x) for x in t.taus) / len(t.taus) if t.taus else None,
        tau_per_event=list(t.taus),
        fa=false_alarm_rate(t.false, t.empty),
        matched_pairs=t.pairs, num_gt=t.gt, num_detections=t.det,
        num_false=t.false, num_empty=t.empty)


def evaluate(events: Sequence[DetectionEvent], gt: Sequence[GroundTruthEvent],
             span: tuple[float, float]) -> EvalReport:
    """Score one recording covering ``span`` seconds."""
    t = _Tally()
    _score_one(t, events, gt, span)
    return _report(t)


def evaluate_corpus(items: Iterable[tuple]) -> EvalReport:
    """Pool ``(events, gt, span)`` triples into one report. Matched-pair
    ground-truth indices are offset so they stay unique across items."""
    t = _Tally()
    for events, gt, span in items:
        _score_one(t, events, gt, span, offset=t.gt)
    return _report(t)


# ground-truth sidecar --------------------------------------------------

def write_ground_truth(fh: TextIO, events: Iterable[GroundTruthEvent],
                       span: tuple[float, float]) -> None:
    """JSON lines: a ``span`` record for the recording, then one record per
    event. The span is needed to count empty segments."""
    fh.write(json.dumps({"span": [span[0], span[1]]}) + "\n")
    for ev in events:
        fh.write(json.dumps({"enter_t": ev.enter_t, "exit_t": ev.exit_t}) + "\n")


def read_ground_truth(fh: TextIO) -> tuple[list[GroundTruthEvent], tuple[float, float] | None]:
    events, span = [], None
    for n, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            if "span" in rec:
                lo, hi = rec["span"]
                span = (float(lo), float(hi))
            else:
                events.append(GroundTruthEvent(float(rec["enter_t"]), float(rec["exit_t"])))
        except (ValueError, KeyError, TypeError) as exc:
            raise EvalInputError(f"line {n}: not a ground-truth record ({exc})") from None
    return events, span
