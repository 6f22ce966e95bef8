"""Synthetic CSI from a multipath channel with one moving person.

Channel on subcarrier ``f_n`` at time ``t``::

    H = sum_l a_l exp(-j 2 pi f_n tau_l)                      static paths
      + A(d) E(t) exp(-j 2 pi (f_n - f_c) tau_d(t))           body reflection
      + B(d) sum_m W[n, m] exp(j k s(t) cos(theta_m))         diffuse body scatter
      + noise

``E(t) = sum_m w_m exp(j k s(t) cos(theta_m))`` spreads the body return
over ``M`` arrival angles, so its time correlation is ``J0(k v lag)`` with
``s(t)`` the distance walked. The body reflection is common to all
subcarriers apart from the delay ramp; the diffuse part has independent
weights per subcarrier. ``A`` falls with ``path_loss_exponent`` and ``B``
with ``diffuse_loss_exponent``, so nearby motion dominates with a
component shared across subcarriers and far motion does not. That is
this simulator's account of why adjacent-subcarrier correlation tracks
distance; it is a modelling choice, not a measured law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .spectral import SPEED_OF_LIGHT, wave_number

MODES = ("walk", "micro", "still")
PROXIMATE_RADIUS = 1.5


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class GroundTruthEvent:
    enter_t: float
    exit_t: float

    def __post_init__(self):
        if not self.enter_t < self.exit_t:
            raise ScenarioError(f"empty interval {self.enter_t}..{self.exit_t}")

    @property
    def duration(self) -> float:
        return self.exit_t - self.enter_t


def random_static_paths(rng: np.random.Generator, num_paths: int = 6,
                        max_delay: float = 80e-9) -> list[tuple[complex, float]]:
    """Line-of-sight path plus exponentially weaker reflections, total power 1."""
    taus = np.sort(rng.uniform(5e-9, max_delay, num_paths))
    taus[0] = rng.uniform(8e-9, 12e-9)
    taus = np.sort(taus)
    power = np.exp(-(taus - taus[0]) / 25e-9)
    power[0] *= 2.0
    power /= power.sum()
    phases = rng.uniform(0, 2 * np.pi, num_paths)
    alphas = np.sqrt(power) * np.exp(1j * phases)
    return [(complex(a), float(t)) for a, t in zip(alphas, taus)]


@dataclass(frozen=True)
class Scene:
    num_subcarriers: int = 56
    center_freq: float = 5.18e9
    bandwidth: float = 40e6
    sample_rate: float = 1500.0
    static_paths: tuple = field(
        default_factory=lambda: tuple(random_static_paths(np.random.default_rng(0))))
    noise_sigma: float = 0.04
    dynamic_gain_ref: float = 0.3
    path_loss_exponent: float = 4.0
    diffuse_gain_ref: float = 0.03
    diffuse_loss_exponent: float = 1.0
    num_angles: int = 64
    path_offset: float = 2.0
    micro_gain: float = 0.08

    def __post_init__(self):
        if self.num_subcarriers < 1:
            raise ScenarioError("num_subcarriers must be positive")
        if not (self.sample_rate > 0 and self.center_freq > 0 and self.bandwidth > 0):
            raise ScenarioError("rates and frequencies must be positive")
        if self.noise_sigma < 0:
            raise ScenarioError("noise_sigma must be non-negative")
        if any(t < 0 for _, t in self.static_paths):
            raise ScenarioError("path delays must be non-negative")

    def subcarrier_freqs(self) -> np.ndarray:
        n = self.num_subcarriers
        return self.center_freq + (np.arange(n) - (n - 1) / 2) * (self.bandwidth / n)

    def static_response(self) -> np.ndarray:
        f = self.subcarrier_freqs()
        h = np.zeros(f.size, dtype=complex)
        for alpha, tau in self.static_paths:
            h += complex(alpha) * np.exp(-2j * np.pi * f * tau)
        return h


@dataclass(frozen=True)
class Trajectory:
    """Radial distance to the device, piecewise linear between waypoints.

    Each waypoint is ``(t, distance, mode)``; the mode describes motion
    from that waypoint to the next (the last one holds to the end).
    ``walk`` advances at ``mean_speed`` modulated at ``gait_rate`` by
    ``gait_depth``; ``micro`` is a bounded fidget whose speed never exceeds
    ``micro_speed``; ``still`` is no motion. A walk that follows a pause
    builds up to full pace linearly over ``walk_accel`` seconds. Only the
    Doppler path feels that ramp; the radial distance stays piecewise
    linear so the ground truth is exact.
    """

    waypoints: tuple
    mean_speed: float = 1.3
    gait_rate: float = 1.0
    gait_depth: float = 0.25
    micro_speed: float = 0.1
    gain_ramp: float = 1.0  # seconds to blend reflectivity between modes
    walk_accel: float = 1.5  # seconds to reach full pace when starting from rest

    def __post_init__(self):
        wps = tuple((float(t), float(d), str(m)) for t, d, m in self.waypoints)
        object.__setattr__(self, "waypoints", wps)
        if not wps:
            raise ScenarioError("trajectory needs at least one waypoint")
        ts = [w[0] for w in wps]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ScenarioError("waypoint times must be strictly increasing")
        if not self.gain_ramp > 0:
            raise ScenarioError("gain_ramp must be positive")
        if not self.walk_accel > 0:
            raise ScenarioError("walk_accel must be positive")
        if any(w[1] <= 0 for w in wps):
            raise ScenarioError("distance must stay positive")
        bad = {w[2] for w in wps} - set(MODES)
        if bad:
            raise ScenarioError(f"unknown motion modes {sorted(bad)}")

    @property
    def times(self) -> np.ndarray:
        return np.array([w[0] for w in self.waypoints])

    def distance(self, t) -> np.ndarray:
        d = np.array([w[1] for w in self.waypoints])
        return np.interp(t, self.times, d)

    def mode_index(self, t) -> np.ndarray:
        idx = np.searchsorted(self.times, t, side="right") - 1
        return np.clip(idx, 0, len(self.waypoints) - 1)


def ground_truth(traj: Trajectory, duration: float,
                 radius: float = PROXIMATE_RADIUS) -> list[GroundTruthEvent]:
    """Intervals during which the distance is at most ``radius``."""
    ts = np.append(traj.times, duration) if traj.times[-1] < duration else traj.times
    ds = traj.distance(ts)
    t0 = 0.0
    inside = bool(traj.distance(0.0) <= radius)
    enter = 0.0 if inside else None
    events = []
    pts = [(0.0, float(traj.distance(0.0)))] + [
        (float(t), float(d)) for t, d in zip(ts, ds) if t > t0 and t <= duration]
    for (ta, da), (tb, db) in zip(pts, pts[1:]):
        if inside and db > radius:
            tc = ta + (radius - da) / (db - da) * (tb - ta)
            if tc > enter:
                events.append(GroundTruthEvent(enter, tc))
            inside, enter = False, None
        elif not inside and db <= radius:
            tc = ta + (radius - da) / (db - da) * (tb - ta) if db != da else ta
            inside, enter = True, tc
    if inside and duration > enter:
        events.append(GroundTruthEvent(enter, duration))
    return events


class _Motion:
    """Distance walked ``s(t)`` and reflective gain for a trajectory."""

    def __init__(self, traj: Trajectory, scene: Scene, rng: np.random.Generator):
        self.traj = traj
        self.gait_phase = rng.uniform(0, 2 * np.pi)
        # fidget: a few incommensurate sinusoids, scaled so |dx/dt| <= micro_speed
        freqs = rng.uniform(0.2, 1.5, 6)
        weights = rng.dirichlet(np.ones(6))
        amp = traj.micro_speed / float(np.sum(weights * 2 * np.pi * freqs))
        self.jit_f = freqs
        self.jit_a = amp * weights
        self.jit_p = rng.uniform(0, 2 * np.pi, 6)
        self.gains = {"walk": 1.0, "micro": scene.micro_gain, "still": scene.micro_gain}
        wps = traj.waypoints
        # walking that starts from rest speeds up over the first steps
        self.from_rest = np.array([i > 0 and m == "walk" and wps[i - 1][2] != "walk"
                                   for i, (_, _, m) in enumerate(wps)])
        # s at each waypoint
        starts = [0.0]
        for i, (t, _, mode) in enumerate(wps[:-1]):
            t_next = wps[i + 1][0]
            starts.append(starts[-1] + self._advance(i, mode, t, t_next))
        self.s_start = np.array(starts)

    def _walk_primitive(self, t):
        tr = self.traj
        w = 2 * np.pi * tr.gait_rate
        if w == 0:
            return tr.mean_speed * t
        return tr.mean_speed * (t - tr.gait_depth / w * np.cos(w * t + self.gait_phase))

    def _jitter(self, t):
        t = np.asarray(t, dtype=float)
        return np.sum(self.jit_a * np.sin(2 * np.pi * self.jit_f * t[..., None] + self.jit_p),
                      axis=-1)

    def _ramp_primitive(self, t, t0):
        """Antiderivative of the walking speed scaled by ``(t - t0) / accel``."""
        tr = self.traj
        tau = t - t0
        w = 2 * np.pi * tr.gait_rate
        base = tau ** 2 / 2
        if w:
            ph = w * t + self.gait_phase
            base = base + tr.gait_depth * (np.sin(ph) / w ** 2 - tau * np.cos(ph) / w)
        return tr.mean_speed / tr.walk_accel * base

    def _walked(self, t, t0, from_rest):
        """Distance walked between segment start ``t0`` and ``t``."""
        t = np.asarray(t, dtype=float)
        t0 = np.asarray(t0, dtype=float)
        steady = self._walk_primitive(t) - self._walk_primitive(t0)
        t_end = t0 + self.traj.walk_accel
        ramp = np.where(
            t <= t_end,
            self._ramp_primitive(t, t0) - self._ramp_primitive(t0, t0),
            self._ramp_primitive(t_end, t0) - self._ramp_primitive(t0, t0)
            + self._walk_primitive(t) - self._walk_primitive(t_end))
        return np.where(from_rest, ramp, steady)

    def _advance(self, i, mode, ta, tb):
        if mode == "walk":
            return float(self._walked(tb, ta, self.from_rest[i]))
        if mode == "micro":
            return float(self._jitter(tb) - self._jitter(ta))
        return 0.0

    def path(self, t: np.ndarray) -> np.ndarray:
        idx = self.traj.mode_index(t)
        t_seg = self.traj.times[idx]
        s = self.s_start[idx].copy()
        modes = np.array([w[2] for w in self.traj.waypoints])[idx]
        walk = modes == "walk"
        micro = modes == "micro"
        s[walk] += self._walked(t[walk], t_seg[walk], self.from_rest[idx][walk])
        s[micro] += self._jitter(t[micro]) - self._jitter(t_seg[micro])
        return s

    def gain(self, t: np.ndarray) -> np.ndarray:
        tr = self.traj
        targets = [self.gains[m] for _, _, m in tr.waypoints]
        # gain at each waypoint start, ramping linearly toward the new target
        start_vals = [targets[0]]
        for i in range(1, len(targets)):
            frac = min(1.0, (tr.times[i] - tr.times[i - 1]) / tr.gain_ramp) if i > 1 else 1.0
            prev = start_vals[-1] + (targets[i - 1] - start_vals[-1]) * frac
            start_vals.append(prev)
        idx = tr.mode_index(t)
        frac = np.clip((t - tr.times[idx]) / tr.gain_ramp, 0.0, 1.0)
        frac = np.where(idx == 0, 1.0, frac)
        g0 = np.asarray(start_vals)[idx]
        return g0 + (np.asarray(targets)[idx] - g0) * frac

    def speed(self, t: np.ndarray) -> np.ndarray:
        """Instantaneous speed; zero outside walking segments (fidget speed
        is not reported)."""
        tr = self.traj
        idx = tr.mode_index(t)
        modes = np.array([w[2] for w in tr.waypoints])[idx]
        v = tr.mean_speed * (1 + tr.gait_depth * np.sin(2 * np.pi * tr.gait_rate * t
                                                        + self.gait_phase))
        ramp = np.clip((t - tr.times[idx]) / tr.walk_accel, 0.0, 1.0)
        v = np.where(self.from_rest[idx], v * ramp, v)
        return np.where(modes == "walk", v, 0.0)


class CsiSimulator:
    """Seeded generator of CSI chunks for one scene and trajectory."""

    def __init__(self, scene: Scene, traj: Trajectory, duration: float, seed: int = 0):
        if not duration > 0:
            raise ScenarioError("duration must be positive")
        if np.any(traj.distance(np.linspace(0, duration, 64)) <= 0):
            raise ScenarioError("distance must stay positive")
        self.scene, self.traj, self.duration, self.seed = scene, traj, duration, seed
        env_ss, motion_ss, noise_ss = np.random.SeedSequence(seed).spawn(3)
        env = np.random.default_rng(env_ss)
        M, N = scene.num_angles, scene.num_subcarriers
        # half circle: every angle has a distinct Doppler shift
        self.cos_theta = np.cos(np.pi * (np.arange(M) + env.uniform()) / M)
        self.w_body = np.exp(2j * np.pi * env.uniform(size=M)) / math.sqrt(M)
        self.w_diffuse = np.exp(2j * np.pi * env.uniform(size=(M, N))) / math.sqrt(M)
        self.motion = _Motion(traj, scene, np.random.default_rng(motion_ss))
        self._noise_ss = noise_ss
        self.k = wave_number(scene.center_freq)
        self.h_static = scene.static_response()
        self.freq_offsets = scene.subcarrier_freqs() - scene.center_freq

    @property
    def num_frames(self) -> int:
        return int(round(self.duration * self.scene.sample_rate))

    def ground_truth(self, radius: float = PROXIMATE_RADIUS) -> list[GroundTruthEvent]:
        return ground_truth(self.traj, self.duration, radius)

    def chunks(self, chunk_frames: int = 1500) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield ``(timestamps, csi)`` with ``csi`` of shape ``(frames, subcarriers)``."""
        sc = self.scene
        noise = np.random.default_rng(self._noise_ss)
        sigma = sc.noise_sigma / math.sqrt(2.0)
        total = self.num_frames
        for start in range(0, total, chunk_frames):
            n = np.arange(start, min(start + chunk_frames, total))
            t = n / sc.sample_rate
            d = self.traj.distance(t)
            s = self.motion.path(t)
            gain = self.motion.gain(t)
            basis = np.exp(1j * self.k * s[:, None] * self.cos_theta[None, :])
            body = (basis @ self.w_body) * gain * sc.dynamic_gain_ref / d ** (
                sc.path_loss_exponent / 2)
            tau = (2 * d + sc.path_offset) / SPEED_OF_LIGHT
            ramp = np.exp(-2j * np.pi * tau[:, None] * self.freq_offsets[None, :])
            diffuse = (basis @ self.w_diffuse) * (gain * sc.diffuse_gain_ref / d ** (
                sc.diffuse_loss_exponent / 2))[:, None]
            h = self.h_static[None, :] + body[:, None] * ramp + diffuse
            if sigma > 0:
                z = noise.standard_normal((n.size, sc.num_subcarriers, 2))
                h = h + sigma * (z[..., 0] + 1j * z[..., 1])
            yield t, h


def generate_csi(scene: Scene, traj: Trajectory, duration: float, seed: int = 0,
                 chunk_frames: int = 1500):
    """Return ``(chunk iterator, ground-truth events)``."""
    sim = CsiSimulator(scene, traj, duration, seed)
    return sim.chunks(chunk_frames), sim.ground_truth()


# presets ---------------------------------------------------------------

PRESETS = ("approach_dwell_leave", "empty_room", "approach_abort", "short_path")


def approach_dwell_leave(start_distance: float = 6.0, dwell_distance: float = 0.6,
                         dwell_s: float = 30.0, lead_s: float = 5.0, tail_s: float = 8.0,
                         speed: float = 1.3, gait_rate: float = 1.0,
                         gait_depth: float = 0.25) -> tuple[Trajectory, float]:
    walk = (start_distance - dwell_distance) / speed
    t_in = lead_s + walk
    t_out = t_in + dwell_s
    t_back = t_out + walk
    wps = [
        (0.0, start_distance, "still"),
        (lead_s, start_distance, "walk"),
        (t_in, dwell_distance, "micro"),
        (t_out, dwell_distance, "walk"),
        (t_back, start_distance, "walk"),  # keeps walking around the start point
        (t_back + tail_s, start_distance, "still"),
    ]
    traj = Trajectory(tuple(wps), mean_speed=speed, gait_rate=gait_rate,
                      gait_depth=gait_depth)
    return traj, t_back + tail_s + 2.0


def approach_abort(start_distance: float = 6.0, turn_distance: float = 3.5,
                   lead_s: float = 5.0, tail_s: float = 8.0,
                   speed: float = 1.3) -> tuple[Trajectory, float]:
    walk = (start_distance - turn_distance) / speed
    wps = [
        (0.0, start_distance, "still"),
        (lead_s, start_distance, "walk"),
        (lead_s + walk, turn_distance, "walk"),
        (lead_s + 2 * walk, start_distance, "walk"),
        (lead_s + 2 * walk + tail_s, start_distance, "still"),
    ]
    return Trajectory(tuple(wps), mean_speed=speed), lead_s + 2 * walk + tail_s + 2.0


def empty_room(duration: float = 300.0, seed: int = 0, near: float = 4.0,
               far: float = 9.0, speed: float = 1.3) -> tuple[Trajectory, float]:
    """Someone moving about the room but never coming closer than ``near``."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x3E]))
    t = 0.0
    d = float(rng.uniform(near + 1, far - 1))
    wps = [(0.0, d, "still")]
    t += float(rng.uniform(2, 5))
    while t < duration:
        action = rng.choice(["walk_to", "pace", "pause"], p=[0.5, 0.25, 0.25])
        if action == "walk_to":
            target = float(rng.uniform(near, far))
            if abs(target - d) < 0.5:
                continue
            wps.append((t, d, "walk"))
            t += abs(target - d) / speed
            d = target
        elif action == "pace":
            wps.append((t, d, "walk"))
            t += float(rng.uniform(2, 6))
        else:
            wps.append((t, d, str(rng.choice(["micro", "still"]))))
            t += float(rng.uniform(3, 15))
    wps.append((t, d, "still"))
    return Trajectory(tuple(wps), mean_speed=speed), duration


def preset_scenario(name: str, seed: int = 0, **params) -> tuple[Scene, Trajectory, float]:
    """Named scenario; the scene's static multipath is drawn from ``seed``."""
    env = np.random.default_rng(np.random.SeedSequence([seed, 0x5C]))
    scene_params = {k: params.pop(k) for k in list(params) if k in Scene.__dataclass_fields__}
    scene = replace(Scene(static_paths=tuple(random_static_paths(env))), **scene_params)
    if name == "approach_dwell_leave":
        traj, duration = approach_dwell_leave(**params)
    elif name == "short_path":
        params.setdefault("start_distance", 3.0)
        traj, duration = approach_dwell_leave(**params)
    elif name == "approach_abort":
        traj, duration = approach_abort(**params)
    elif name == "empty_room":
        traj, duration = empty_room(seed=seed, **params)
    else:
        raise ScenarioError(f"unknown scenario {name!r}; choose from {', '.join(PRESETS)}")
    return scene, traj, duration
