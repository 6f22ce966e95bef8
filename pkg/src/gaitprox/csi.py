"""CSI and power-response containers plus the preprocessing chain.

Frames are kept as small dataclasses for the per-frame API; the streaming
paths work on ``(timestamps, matrix)`` pairs so that a chunk of a few
thousand frames never turns into a few thousand Python objects.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

logger = logging.getLogger(__name__)

MAD_SCALE = 1.4826
JITTER_TOLERANCE = 0.10


class FrameError(ValueError):
    """A frame failed validation (non-finite values, shape mismatch)."""


class DegenerateFrameError(FrameError):
    """Normalization of a frame whose power is zero everywhere."""


class ParameterError(ValueError):
    pass


class StreamWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CsiFrame:
    timestamp: float
    csi: np.ndarray
    subcarrier_freqs: np.ndarray

    def __post_init__(self):
        csi = np.asarray(self.csi, dtype=complex)
        freqs = np.asarray(self.subcarrier_freqs, dtype=float)
        object.__setattr__(self, "csi", csi)
        object.__setattr__(self, "subcarrier_freqs", freqs)
        if csi.ndim != 1 or csi.shape != freqs.shape:
            raise FrameError(f"csi has shape {csi.shape}, freqs {freqs.shape}")
        if not (np.all(np.isfinite(csi)) and np.all(np.isfinite(freqs))
                and np.isfinite(self.timestamp)):
            raise FrameError(f"non-finite values in frame at t={self.timestamp}")
        if freqs.size > 1 and np.any(np.diff(freqs) <= 0):
            raise FrameError("subcarrier frequencies must be strictly increasing")


@dataclass(frozen=True)
class PowerFrame:
    timestamp: float
    g: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        object.__setattr__(self, "g", g)
        if g.ndim != 1:
            raise FrameError("power frame must be a vector")
        if not (np.all(np.isfinite(g)) and np.isfinite(self.timestamp)):
            raise FrameError(f"non-finite values in frame at t={self.timestamp}")
        if np.any(g < 0):
            raise FrameError("power response must be non-negative")


@dataclass
class PowerSeries:
    """Time x subcarrier power matrix with its sampling rate.

    ``g`` has shape ``(num_frames, num_subcarriers)``.
    """

    sample_rate: float
    timestamps: np.ndarray
    g: np.ndarray
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.g = np.atleast_2d(np.asarray(self.g, dtype=float))
        if self.g.shape[0] != self.timestamps.shape[0]:
            raise FrameError("timestamps and power rows differ in length")
        if self.sample_rate <= 0:
            raise ParameterError("sample_rate must be positive")
        if self.timestamps.size > 1:
            dt = np.diff(self.timestamps)
            nominal = 1.0 / self.sample_rate
            bad = np.abs(dt - nominal) > JITTER_TOLERANCE * nominal
            if np.any(bad):
                msg = (f"{int(bad.sum())} frame gaps outside "
                       f"{JITTER_TOLERANCE:.0%} of 1/{self.sample_rate:g} s")
                self.warnings.append(msg)
                warnings.warn(msg, StreamWarning, stacklevel=2)

    @classmethod
    def from_frames(cls, frames, sample_rate: float) -> "PowerSeries":
        frames = list(frames)
        widths = {f.g.size for f in frames}
        if len(widths) > 1:
            raise FrameError(f"frames of differing widths: {sorted(widths)}")
        ts = np.array([f.timestamp for f in frames], dtype=float)
        g = (np.vstack([f.g for f in frames]) if frames
             else np.empty((0, 0)))
        return cls(sample_rate, ts, g)

    @property
    def num_subcarriers(self) -> int:
        return self.g.shape[1]

    @property
    def frames(self) -> list[PowerFrame]:
        return [PowerFrame(t, row) for t, row in zip(self.timestamps, self.g)]

    def __len__(self):
        return self.g.shape[0]

    def segment(self, start: int, stop: int) -> "PowerSeries":
        return PowerSeries(self.sample_rate, self.timestamps[start:stop],
                           self.g[start:stop])


def power_response(frame: CsiFrame) -> PowerFrame:
    """``|H|^2`` per subcarrier."""
    csi = frame.csi
    return PowerFrame(frame.timestamp, csi.real ** 2 + csi.imag ** 2)


def power_matrix(csi: np.ndarray) -> np.ndarray:
    """Vectorized ``power_response`` for a ``(frames, subcarriers)`` block."""
    csi = np.asarray(csi)
    if not np.all(np.isfinite(csi)):
        raise FrameError("non-finite CSI values")
    return csi.real ** 2 + csi.imag ** 2


def normalize_frame(frame: PowerFrame) -> PowerFrame:
    """Divide by the cross-subcarrier mean so automatic gain changes cancel."""
    mean = frame.g.mean() if frame.g.size else 0.0
    if not mean > 0:
        raise DegenerateFrameError(f"all-zero power frame at t={frame.timestamp}")
    return PowerFrame(frame.timestamp, frame.g / mean)


def normalize_matrix(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise ``normalize_frame``.

    Returns the normalized rows and a boolean mask of the rows kept;
    all-zero rows are dropped, matching the per-frame behaviour where the
    degenerate frame is discarded and the stream continues.
    """
    mean = g.mean(axis=1)
    keep = mean > 0
    if not np.all(keep):
        logger.warning("dropped %d degenerate all-zero frames", int((~keep).sum()))
    return g[keep] / mean[keep, None], keep


def _hampel_columns(x: np.ndarray, window: int, n_sigmas: float) -> np.ndarray:
    n = x.shape[0]
    half = window // 2
    med = np.empty_like(x)
    mad = np.empty_like(x)
    if n >= window:
        win = sliding_window_view(x, window, axis=0)  # (n-w+1, cols, w)
        m = np.median(win, axis=-1)
        med[half:n - half] = m
        mad[half:n - half] = np.median(np.abs(win - m[..., None]), axis=-1)
    edges = list(range(min(half, n))) + list(range(max(n - half, half), n))
    for i in edges:
        seg = x[max(0, i - half):min(n, i + half + 1)]
        m = np.median(seg, axis=0)
        med[i] = m
        mad[i] = np.median(np.abs(seg - m), axis=0)
    # strict '>' means a zero MAD replaces anything off the median
    outlier = np.abs(x - med) > n_sigmas * MAD_SCALE * mad
    return np.where(outlier, med, x)


def hampel_filter(series: PowerSeries, window: int = 31,
                  n_sigmas: float = 3.0) -> PowerSeries:
    """Replace samples that sit more than ``n_sigmas`` scaled MADs away
    from their centered-window median, independently per subcarrier.

    Edges use truncated windows. A window longer than the series leaves it
    untouched (with a warning).
    """
    if window < 3 or window % 2 == 0:
        raise ParameterError(f"Hampel window must be odd and >= 3, got {window}")
    if not n_sigmas > 0:
        raise ParameterError("n_sigmas must be positive")
    if window > len(series):
        warnings.warn(f"Hampel window {window} exceeds series length "
                      f"{len(series)}; returning input", StreamWarning, stacklevel=2)
        return PowerSeries(series.sample_rate, series.timestamps.copy(),
                           series.g.copy())
    out = _hampel_columns(series.g, window, n_sigmas)
    return PowerSeries(series.sample_rate, series.timestamps.copy(), out)


class StreamingHampel:
    """Chunked Hampel filter whose output equals ``hampel_filter`` on the
    concatenated input, delayed by half a window."""

    def __init__(self, window: int = 31, n_sigmas: float = 3.0):
        if window < 3 or window % 2 == 0:
            raise ParameterError(f"Hampel window must be odd and >= 3, got {window}")
        self.window = window
        self.n_sigmas = n_sigmas
        self._half = window // 2
        self._t = np.empty(0)
        self._g = None
        self._emitted = 0  # absolute index of the next row to emit
        self._offset = 0   # absolute index of self._g[0]

    def push(self, timestamps: np.ndarray, g: np.ndarray):
        """Add rows; return ``(timestamps, filtered)`` for rows now final."""
        g = np.atleast_2d(g)
        if self._g is None:
            self._g = np.empty((0, g.shape[1]))
        self._t = np.concatenate([self._t, timestamps])
        self._g = np.vstack([self._g, g])
        total = self._offset + len(self._t)
        stop = total - self._half  # rows with a full right half-window
        return self._emit(stop, final=False)

    def flush(self):
        if self._g is None:
            return np.empty(0), np.empty((0, 0))
        return self._emit(self._offset + len(self._t), final=True)

    def _emit(self, stop: int, final: bool):
        h = self._half
        start = self._emitted
        if stop <= start:
            return np.empty(0), np.empty((0, self._g.shape[1]))
        lo = max(self._offset, start - h)
        hi = min(self._offset + len(self._t), stop + h)
        seg = self._g[lo - self._offset:hi - self._offset]
        n_total = self._offset + len(self._t)
        out = np.empty((stop - start, seg.shape[1]))
        for j, i in enumerate(range(start, stop)):
            a, b = max(0, i - h), min(n_total, i + h + 1)
            win = seg[a - lo:b - lo]
            m = np.median(win, axis=0)
            mad = np.median(np.abs(win - m), axis=0)
            x = seg[i - lo]
            out[j] = np.where(np.abs(x - m) > self.n_sigmas * MAD_SCALE * mad, m, x)
        ts = self._t[start - self._offset:stop - self._offset]
        self._emitted = stop
        if not final:
            # keep enough history for the left half-window of the next row
            drop = max(0, stop - h - self._offset)
            self._t = self._t[drop:]
            self._g = self._g[drop:]
            self._offset += drop
        return ts, out


def downsample(series: PowerSeries, factor: int) -> PowerSeries:
    """Block-mean decimation by an integer factor; a trailing partial
    block is discarded. Timestamps are block means."""
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ParameterError(f"downsample factor must be a positive integer, got {factor!r}")
    if factor == 1:
        return PowerSeries(series.sample_rate, series.timestamps.copy(), series.g.copy())
    n = (len(series) // factor) * factor
    g = series.g[:n].reshape(-1, factor, series.g.shape[1]).mean(axis=1)
    ts = series.timestamps[:n].reshape(-1, factor).mean(axis=1)
    return PowerSeries(series.sample_rate / factor, ts, g)


class BlockDownsampler:
    """Streaming counterpart of ``downsample``: carries partial blocks
    across chunk boundaries."""

    def __init__(self, factor: int):
        if factor < 1:
            raise ParameterError("downsample factor must be >= 1")
        self.factor = int(factor)
        self._t = np.empty(0)
        self._g = None

    def push(self, timestamps: np.ndarray, g: np.ndarray):
        if self._g is None:
            self._g = np.empty((0, g.shape[1]))
        t = np.concatenate([self._t, timestamps])
        x = np.vstack([self._g, g])
        n = (len(t) // self.factor) * self.factor
        self._t, self._g = t[n:], x[n:]
        if n == 0:
            return np.empty(0), np.empty((0, x.shape[1]))
        f = self.factor
        return (t[:n].reshape(-1, f).mean(axis=1),
                x[:n].reshape(-1, f, x.shape[1]).mean(axis=1))
