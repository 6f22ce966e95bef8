"""Four-state proximity machine: Faraway -> Approaching -> Near -> Leaving.

Each transition guard must hold for ``debounce`` consecutive samples.
Events are emitted only on entering Near from Approaching and on leaving
to Faraway from Leaving, stamped with the first sample of the debounced
run.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, TextIO

from .features import FeatureSample


class StreamError(ValueError):
    """Feature samples arrived out of time order."""


class ConfigError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ProximityState(enum.Enum):
    FARAWAY = "Faraway"
    APPROACHING = "Approaching"
    NEAR = "Near"
    LEAVING = "Leaving"


class EventKind(enum.Enum):
    NEAR_ENTERED = "NearEntered"
    NEAR_EXITED = "NearExited"


@dataclass(frozen=True)
class FsmConfig:
    theta_near: float = 0.65
    theta_far: float = 0.45
    theta_gait: float = 0.05
    theta_slope: float = 0.02
    debounce: int = 5
    timeout_approach: float = 10.0

    def violations(self) -> list[str]:
        out = []
        for name in ("theta_near", "theta_far", "theta_gait", "theta_slope",
                     "timeout_approach"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                out.append(f"fsm.{name} must be a finite number, got {v!r}")
        if not out and not self.theta_far < self.theta_near:
            out.append(f"fsm.theta_far ({self.theta_far}) must be below "
                       f"fsm.theta_near ({self.theta_near})")
        if not isinstance(self.debounce, int) or isinstance(self.debounce, bool) \
                or self.debounce < 1:
            out.append(f"fsm.debounce must be an integer >= 1, got {self.debounce!r}")
        if not out and self.timeout_approach < 0:
            out.append("fsm.timeout_approach must be non-negative")
        return out

    def validate(self) -> "FsmConfig":
        bad = self.violations()
        if bad:
            raise ConfigError(bad)
        return self


@dataclass(frozen=True)
class DetectionEvent:
    kind: EventKind
    t: float
    state_before: ProximityState
    state_after: ProximityState

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind.value, "t": self.t,
                           "state_before": self.state_before.value,
                           "state_after": self.state_after.value})

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionEvent":
        return cls(EventKind(d["kind"]), float(d["t"]),
                   ProximityState(d.get("state_before", "Approaching" if d["kind"] ==
                                        "NearEntered" else "Leaving")),
                   ProximityState(d.get("state_after", "Near" if d["kind"] ==
                                        "NearEntered" else "Faraway")))


@dataclass
class _Guard:
    target: ProximityState
    holds: Callable[[FeatureSample, FsmConfig], bool]
    event: EventKind | None = None
    min_duration: float = 0.0  # seconds the condition must also persist


def _transitions(cfg: FsmConfig) -> dict:
    S = ProximityState
    gait = lambda s, c: s.fg > c.theta_gait  # noqa: E731
    return {
        S.FARAWAY: [
            _Guard(S.APPROACHING, lambda s, c: s.fs > c.theta_slope and gait(s, c)),
        ],
        S.APPROACHING: [
            _Guard(S.NEAR, lambda s, c: s.fp >= c.theta_near, EventKind.NEAR_ENTERED),
            _Guard(S.FARAWAY, lambda s, c: not gait(s, c) and s.fp < c.theta_near,
                   min_duration=cfg.timeout_approach),
        ],
        S.NEAR: [
            _Guard(S.LEAVING, lambda s, c: s.fs < -c.theta_slope and gait(s, c)),
        ],
        S.LEAVING: [
            _Guard(S.FARAWAY, lambda s, c: s.fp <= c.theta_far, EventKind.NEAR_EXITED),
            _Guard(S.NEAR, lambda s, c: s.fp > c.theta_near and not gait(s, c)),
        ],
    }


@dataclass
class ProximityFsm:
    """Stateful fold over one feature stream."""

    cfg: FsmConfig = field(default_factory=FsmConfig)
    state: ProximityState = ProximityState.FARAWAY
    dwell: int = 0  # samples spent in the current state

    def __post_init__(self):
        self.cfg.validate()
        self._table = _transitions(self.cfg)
        self._runs: dict[int, tuple[int, float]] = {}
        self._last_t: float | None = None

    def step(self, s: FeatureSample) -> DetectionEvent | None:
        if self._last_t is not None and s.t < self._last_t:
            raise StreamError(f"sample at t={s.t} precedes t={self._last_t}")
        if not all(math.isfinite(x) for x in (s.t, s.fp, s.fs, s.fg)):
            raise StreamError(f"non-finite feature sample at t={s.t}")
        self._last_t = s.t
        self.dwell += 1
        fired = None
        for i, guard in enumerate(self._table[self.state]):
            if guard.holds(s, self.cfg):
                count, start = self._runs.get(i, (0, s.t))
                count += 1
                self._runs[i] = (count, start)
                if (fired is None and count >= self.cfg.debounce
                        and s.t - start >= guard.min_duration):
                    fired = (guard, start)
            else:
                self._runs.pop(i, None)
        if fired is None:
            return None
        guard, start = fired
        before = self.state
        self.state = guard.target
        self.dwell = 0
        self._runs.clear()
        if guard.event is None:
            return None
        return DetectionEvent(guard.event, start, before, guard.target)


def run_detector(samples: Iterable[FeatureSample], cfg: FsmConfig = FsmConfig(),
                 trace: list | None = None) -> list[DetectionEvent]:
    """Fold the machine over ``samples`` from Faraway. When ``trace`` is a
    list, ``(t, state)`` pairs are appended to it."""
    fsm = ProximityFsm(cfg)
    events = []
    for s in samples:
        ev = fsm.step(s)
        if ev is not None:
            events.append(ev)
        if trace is not None:
            trace.append((s.t, fsm.state))
    return events


def write_events(fh: TextIO, events: Iterable[DetectionEvent]) -> None:
    for ev in events:
        fh.write(ev.to_json() + "\n")


def read_events(fh: TextIO) -> list[DetectionEvent]:
    out = []
    for n, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        try:
            out.append(DetectionEvent.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"line {n}: not a detection event ({exc})") from None
    return out


def write_state_trace(fh: TextIO, trace: Iterable[tuple[float, ProximityState]]) -> None:
    fh.write("t,state\n")
    for t, st in trace:
        fh.write(f"{t:.6f},{st.value}\n")


def config_dict(cfg: FsmConfig) -> dict:
    return asdict(cfg)
