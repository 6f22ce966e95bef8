"""Per-step features fed to the state machine.

``fp``  mean Pearson correlation of adjacent subcarriers (proximity)
``fs``  least-squares slope of ``fp`` over a trailing window
``c``   gait cycles per second, from peaks of the speed track
``fg``  gait score: ACF-shape weight x walking-speed likelihood, gated on ``c``
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks
from scipy.special import ndtr

from .spectral import SpeedEstimate


@dataclass(frozen=True)
class GaitParams:
    mean_speed: float = 1.34
    std_speed: float = 0.37
    c_min: float = 0.5
    c_max: float = 1.5

    def __post_init__(self):
        if not self.std_speed > 0:
            raise ValueError("std_speed must be positive")
        if not self.c_min < self.c_max:
            raise ValueError("c_min must be below c_max")


@dataclass(frozen=True)
class FeatureSample:
    t: float
    fp: float
    fs: float = 0.0
    v_hat: float = 0.0
    c: float = 0.0
    fg: float = 0.0


def proximity_feature(g: np.ndarray) -> float:
    """Average correlation between neighbouring subcarriers over a window.

    ``g`` is ``(samples, subcarriers)``. A constant subcarrier contributes 0
    to both of its pairs.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[1] < 2:
        raise ValueError("need a (samples, >=2 subcarriers) window")
    if g.shape[0] < 10:
        raise ValueError(f"need at least 10 samples, got {g.shape[0]}")
    x = g - g.mean(axis=0)
    norm = np.sqrt(np.einsum("ij,ij->j", x, x))
    ok = norm > 1e-12 * max(1.0, float(np.abs(g).max()))
    z = np.where(ok, x / np.where(ok, norm, 1.0), 0.0)
    rho = np.einsum("ij,ij->j", z[:, :-1], z[:, 1:])
    return float(np.clip(rho, -1.0, 1.0).mean())


def slope(t: np.ndarray, fp: np.ndarray) -> tuple[float, bool]:
    """OLS slope of ``fp`` against ``t``; ``(0.0, False)`` with fewer than 3 points."""
    t = np.asarray(t, dtype=float)
    fp = np.asarray(fp, dtype=float)
    if t.size < 3:
        return 0.0, False
    tc = t - t.mean()
    den = float(tc @ tc)
    if den == 0:
        return 0.0, False
    return float(tc @ (fp - fp.mean()) / den), True


def walking_speed_probability(v: float, params: GaitParams = GaitParams()) -> float:
    """Two-sided tail mass of ``v`` under the pedestrian speed distribution.

    1 at the mean speed, falling symmetrically to 0 in both directions.
    """
    z = (v - params.mean_speed) / params.std_speed
    return float(1.0 - 2.0 * abs(ndtr(z) - 0.5))


def gait_cycle_rate(t: np.ndarray, v_hat: np.ndarray, window: float,
                    min_prominence: float = 0.1) -> tuple[float, bool]:
    """Peaks of the speed track per second over the trailing ``window``.

    Windows without a speed estimate should be passed as NaN; they are
    dropped rather than read as zero speed, which would fabricate peaks.
    Returns ``(0.0, False)`` until the history spans ``window`` seconds.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v_hat, dtype=float)
    if t.size < 2:
        return 0.0, False
    # n samples at spacing dt cover n*dt seconds
    covered = t[-1] - t[0] + float(np.median(np.diff(t)))
    if covered < window - 1e-9:
        return 0.0, False
    sel = (t > t[-1] - window) & np.isfinite(v)
    if np.count_nonzero(sel) < 3:
        return 0.0, True
    peaks, _ = find_peaks(v[sel], prominence=min_prominence)
    return peaks.size / window, True


def gait_weight(est: SpeedEstimate) -> float:
    """Summed prominence of the ACF-differential valley and the peak that
    follows it. Zero unless both exist."""
    if not est.found or est.peak_prominence <= 0 or est.valley_prominence <= 0:
        return 0.0
    return est.valley_prominence + est.peak_prominence


def gait_score(est: SpeedEstimate, c: float, params: GaitParams = GaitParams()) -> float:
    w = gait_weight(est)
    if not (w > 0 and params.c_min <= c <= params.c_max):
        return 0.0
    return w * walking_speed_probability(est.v_hat, params)

