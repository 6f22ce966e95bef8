"""Streaming dual-rate feature extraction.

Full-rate branch: power -> per-frame normalization -> sliding ACF windows
-> speed estimate and ACF-shape weight.
Proximity branch: the same normalized frames, block-mean downsampled,
Hampel-filtered, then adjacent-subcarrier correlation over a trailing
window.

The proximity branch lags the ACF branch by half a Hampel window, so each
feature tick is taken on the proximity clock and pairs with the latest ACF
window ending at or before it.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable, Iterator, TextIO

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .config import PipelineConfig
from .csi import BlockDownsampler, StreamingHampel, normalize_matrix, power_matrix
from .features import (FeatureSample, gait_cycle_rate, gait_score, proximity_feature,
                       slope)
from .spectral import (NOT_FOUND, AcfResult, SpeedEstimate, acf_per_subcarrier,
                       combine_acf_batch, estimate_speed, wave_number)


class FeatureExtractor:
    """Consumes ``(timestamps, rows)`` chunks; yields ``FeatureSample``s.

    ``acf_trace`` (a text handle) receives ``window_end,lag,acf,acf_diff``
    rows; ``acf_diff`` is the difference between lag ``l`` and ``l+1`` and
    is blank on the last lag.
    """

    def __init__(self, cfg: PipelineConfig, acf_trace: TextIO | None = None):
        self.cfg = cfg.validate()
        self.k = wave_number(cfg.center_freq)
        self._W = cfg.acf_window
        self._hop = cfg.acf_hop
        self._L = cfg.acf_max_lag
        self._lag_step = 1.0 / cfg.sample_rate
        self._buf_t = np.empty(0)
        self._buf_g: np.ndarray | None = None
        self._next_start = 0   # absolute index of the next ACF window start
        self._buf_offset = 0   # absolute index of _buf_g[0]
        self._acf = deque()    # (window_end, SpeedEstimate)
        self._down = BlockDownsampler(cfg.downsample_factor)
        self._hampel = StreamingHampel(cfg.hampel.window, cfg.hampel.n_sigmas)
        self._prox = deque(maxlen=cfg.fp_window)
        self._prox_count = 0
        self._ticks = deque()  # (t, fp) history for the slope
        self._last_est: SpeedEstimate = NOT_FOUND
        self._acf_trace = acf_trace
        if acf_trace is not None:
            acf_trace.write("window_end,lag,acf,acf_diff\n")

    # public ------------------------------------------------------------
    def push_csi(self, timestamps: np.ndarray, csi: np.ndarray) -> list[FeatureSample]:
        return self.push_power(timestamps, power_matrix(csi))

    def push_power(self, timestamps: np.ndarray, g: np.ndarray) -> list[FeatureSample]:
        g = np.asarray(g, dtype=float)
        if g.ndim != 2 or g.shape[0] != len(timestamps):
            raise ValueError("power block must be (frames, subcarriers)")
        if g.shape[1] < 2:
            raise ValueError("need at least 2 subcarriers")
        g, keep = normalize_matrix(g)
        ts = np.asarray(timestamps, dtype=float)[keep]
        if ts.size == 0:
            return []
        self._acf_branch(ts, g)
        t_low, g_low = self._down.push(ts, g)
        if t_low.size == 0:
            return []
        return self._proximity_branch(*self._hampel.push(t_low, g_low))

    def finish(self) -> list[FeatureSample]:
        t, g = self._hampel.flush()
        if t.size == 0:
            return []
        return self._proximity_branch(t, g)

    def run(self, chunks: Iterable[tuple[np.ndarray, np.ndarray]],
            kind: str = "csi") -> Iterator[FeatureSample]:
        push = self.push_csi if kind == "csi" else self.push_power
        for ts, block in chunks:
            yield from push(ts, block)
        yield from self.finish()

    # full-rate branch ----------------------------------------------------
    def _acf_branch(self, ts: np.ndarray, g: np.ndarray) -> None:
        if self._buf_g is None:
            self._buf_g = np.empty((0, g.shape[1]))
        self._buf_t = np.concatenate([self._buf_t, ts])
        self._buf_g = np.vstack([self._buf_g, g])
        first = self._next_start - self._buf_offset
        n = len(self._buf_t)
        if n - first >= self._W:
            count = (n - first - self._W) // self._hop + 1
            span = self._buf_g[first:first + (count - 1) * self._hop + self._W]
            wins = sliding_window_view(span, self._W, axis=0)[::self._hop]
            wins = np.swapaxes(wins, -1, -2)  # (windows, W, subcarriers)
            acf, valid = acf_per_subcarrier(wins, self._L)
            comb, diffs, w, flagged = combine_acf_batch(
                acf, valid, self._lag_step, self.cfg.acf.motion_floor)
            lags = np.arange(self._L + 1) * self._lag_step
            ends = self._buf_t[first + self._W - 1 + self._hop * np.arange(count)]
            for i in range(count):
                res = AcfResult(float(ends[i]), lags, comb[i], diffs[i], w[i],
                                bool(flagged[i]))
                est = estimate_speed(res, self.k)
                self._acf.append((res.window_end, est))
                if self._acf_trace is not None:
                    self._write_acf(res)
            self._next_start += count * self._hop
        drop = min(self._next_start - self._buf_offset, n)
        if drop > 0:
            self._buf_t = self._buf_t[drop:]
            self._buf_g = self._buf_g[drop:]
            self._buf_offset += drop

    def _write_acf(self, res: AcfResult) -> None:
        diff = [f"{d:.9g}" for d in res.acf_diff] + [""]
        self._acf_trace.write("".join(
            f"{res.window_end:.6f},{lag:.6f},{a:.9g},{d}\n"
            for lag, a, d in zip(res.lags, res.acf, diff)))

    # proximity branch ------------------------------------------------------
    def _proximity_branch(self, ts: np.ndarray, g: np.ndarray) -> list[FeatureSample]:
        out = []
        cfg = self.cfg
        for t, row in zip(ts, g):
            self._prox.append(row)
            self._prox_count += 1
            if len(self._prox) < cfg.fp_window:
                continue
            if self._prox_count % cfg.feature_decimation:
                continue
            out.append(self._tick(float(t), proximity_feature(np.array(self._prox))))
        return out

    def _tick(self, t: float, fp: float) -> FeatureSample:
        cfg = self.cfg
        self._ticks.append((t, fp))
        while self._ticks and self._ticks[0][0] <= t - cfg.slope_window_s:
            self._ticks.popleft()
        tt, ff = zip(*self._ticks)
        fs, _ = slope(np.array(tt), np.array(ff))

        # ACF windows ending at or before t; keep one gait window of history
        est = self._last_est
        hist_t, hist_v = [], []
        for end, e in self._acf:
            if end > t:
                break
            est = e
            hist_t.append(end)
            hist_v.append(e.v_hat if e.found else np.nan)
        self._last_est = est
        while self._acf and self._acf[0][0] <= t - cfg.gait_window_s - 1.0:
            self._acf.popleft()
        c, ready = (gait_cycle_rate(np.array(hist_t), np.array(hist_v), cfg.gait_window_s)
                    if hist_t else (0.0, False))
        fg = gait_score(est, c, cfg.gait) if ready else 0.0
        return FeatureSample(t, fp, fs, est.v_hat, c, fg)


def write_feature_trace(fh: TextIO, samples: Iterable[FeatureSample]) -> None:
    fh.write("t,fp,fs,v_hat,c,fg\n")
    for s in samples:
        fh.write(f"{s.t:.6f},{s.fp:.9g},{s.fs:.9g},{s.v_hat:.9g},{s.c:.9g},{s.fg:.9g}\n")


def read_feature_trace(fh: TextIO) -> list[FeatureSample]:
    header = fh.readline().strip()
    if header != "t,fp,fs,v_hat,c,fg":
        raise ValueError(f"unexpected feature trace header {header!r}")
    out = []
    for line in fh:
        if line.strip():
            out.append(FeatureSample(*(float(x) for x in line.split(","))))
    return out
