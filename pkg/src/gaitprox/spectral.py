"""Autocorrelation of power-response windows and Bessel-model speed read-off.

Under rich scattering the ACF of the power response on a subcarrier is a
gain times ``J0(k v lag)``. Its lag derivative is proportional to
``-J1(k v lag)``, whose first extremum sits at ``BESSEL_J1_FIRST_MAX``;
locating that valley in the measured ACF differential gives the speed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks
from scipy.special import j1

SPEED_OF_LIGHT = 299_792_458.0
# argmax of J1 on (0, 3.83)
BESSEL_J1_FIRST_MAX = 1.8411837813406593

PROMINENCE_FLOOR = 0.02
# valleys must also reach this fraction of the most prominent valley
RELATIVE_PROMINENCE = 0.5
# width of the differentiating Gaussian, in units of the Bessel argument
SMOOTH_BESSEL = 0.9
SPEED_ITERATIONS = 3


def wave_number(center_freq: float) -> float:
    """``2*pi*f/c`` in rad/m."""
    if not center_freq > 0:
        raise ValueError("center frequency must be positive")
    return 2.0 * np.pi * center_freq / SPEED_OF_LIGHT


@dataclass
class AcfResult:
    window_end: float
    lags: np.ndarray
    acf: np.ndarray
    acf_diff: np.ndarray
    per_subcarrier_weight: np.ndarray
    flagged: bool = False  # no subcarrier qualified; acf is all zeros

    @property
    def diff_lags(self) -> np.ndarray:
        """Lags at which ``acf_diff`` is evaluated (midpoints)."""
        return 0.5 * (self.lags[1:] + self.lags[:-1])


@dataclass(frozen=True)
class SpeedEstimate:
    v_hat: float = 0.0
    valley_lag: float = 0.0
    peak_prominence: float = 0.0
    valley_prominence: float = 0.0
    found: bool = False


NOT_FOUND = SpeedEstimate()


def acf_per_subcarrier(g: np.ndarray, max_lag: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalized sample autocorrelation of each column of ``g``.

    ``rho(l) = sum (x_t - m)(x_{t+l} - m) / ((n - l) s^2)`` for
    ``l = 0 .. max_lag`` with ``s^2`` the biased variance, so ``rho(0) = 1``.
    Also accepts a stack of windows ``(..., n, subcarriers)``.

    Returns ``(acf, valid)`` where ``acf`` has shape ``(..., max_lag+1,
    subcarriers)`` and ``valid`` marks columns with non-zero variance;
    zero-variance columns get an all-zero ACF.
    """
    g = np.asarray(g, dtype=float)
    n = g.shape[-2]
    if max_lag < 1 or 2 * max_lag > n:
        raise ValueError(f"need 1 <= max_lag <= n/2 (n={n}, max_lag={max_lag})")
    x = g - g.mean(axis=-2, keepdims=True)
    nfft = sfft.next_fast_len(n + max_lag + 1, real=True)
    spectrum = sfft.rfft(x, n=nfft, axis=-2)
    raw = sfft.irfft(spectrum.real ** 2 + spectrum.imag ** 2, n=nfft, axis=-2)
    raw = raw[..., :max_lag + 1, :]
    var = raw[..., :1, :] / n
    scale = np.max(np.abs(g), axis=-2, keepdims=True) ** 2
    valid = var > 1e-12 * np.maximum(scale, 1e-300)
    counts = (n - np.arange(max_lag + 1))[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        acf = np.where(valid, raw / (counts * np.where(valid, var, 1.0)), 0.0)
    return acf, valid[..., 0, :]


def despike(acf: np.ndarray) -> np.ndarray:
    """Replace the lag-0 value (which carries the white-noise spike) by an
    even extrapolation from lags 1 and 2. Works on the last axis."""
    a = np.array(acf, dtype=float, copy=True)
    if a.shape[-1] >= 3:
        a[..., 0] = (4.0 * a[..., 1] - a[..., 2]) / 3.0
    return a


def acf_differential(acf: np.ndarray, lag_step: float) -> np.ndarray:
    """Central difference of the de-spiked ACF at half-integer lags."""
    return np.diff(despike(acf), axis=-1) / lag_step


def combine_acf(acf: np.ndarray, lag_step: float, window_end: float = 0.0,
                valid: np.ndarray | None = None,
                motion_floor: float = 0.0) -> AcfResult:
    """Weight per-subcarrier ACFs by their clipped lag-1 value.

    ``acf`` is ``(lags, subcarriers)``. Weights are ``max(rho_f(1), 0)``
    normalized to sum 1. When the mean lag-1 correlation over valid
    subcarriers is below ``motion_floor`` the window counts as static and
    every weight is zero; the result is then flagged with an all-zero ACF.
    """
    acf = np.asarray(acf, dtype=float)
    if acf.ndim == 1:
        acf = acf[:, None]
    L, N = acf.shape
    if valid is None:
        valid = np.any(acf != 0, axis=0)
    lags = np.arange(L) * lag_step
    w = np.where(valid, np.maximum(acf[1], 0.0), 0.0) if L > 1 else np.zeros(N)
    motion = acf[1][valid].mean() if L > 1 and np.any(valid) else 0.0
    if w.sum() <= 0 or motion < motion_floor:
        zeros = np.zeros(L)
        return AcfResult(window_end, lags, zeros, np.zeros(L - 1), np.zeros(N), flagged=True)
    w = w / w.sum()
    combined = acf @ w
    return AcfResult(window_end, lags, combined,
                     acf_differential(combined, lag_step), w)


def combine_acf_batch(acf: np.ndarray, valid: np.ndarray, lag_step: float,
                      motion_floor: float = 0.0):
    """Vectorized ``combine_acf`` over a stack ``(windows, lags, subcarriers)``.

    Returns ``(combined, diffs, weights, flagged)`` arrays.
    """
    rho1 = np.where(valid, acf[:, 1, :], 0.0)
    nvalid = valid.sum(axis=1)
    motion = np.where(nvalid > 0, rho1.sum(axis=1) / np.maximum(nvalid, 1), 0.0)
    w = np.maximum(rho1, 0.0)
    wsum = w.sum(axis=1)
    flagged = (wsum <= 0) | (motion < motion_floor)
    w = np.where(flagged[:, None], 0.0, w / np.where(wsum > 0, wsum, 1.0)[:, None])
    combined = np.einsum("wlf,wf->wl", acf, w)
    diffs = acf_differential(combined, lag_step)
    diffs[flagged] = 0.0
    return combined, diffs, w, flagged


def _parabolic_offset(y: np.ndarray, i: int) -> float:
    if 0 < i < len(y) - 1:
        den = y[i - 1] - 2.0 * y[i] + y[i + 1]
        if den != 0:
            return float(np.clip(0.5 * (y[i - 1] - y[i + 1]) / den, -0.5, 0.5))
    return 0.0


@lru_cache(maxsize=None)
def smoothed_j1_peak(beta: float) -> float:
    """Location of the first maximum of J1 (odd-extended) after convolution
    with a unit-area Gaussian of standard deviation ``beta``.

    This is where the first valley of a J0 ACF differential lands once it
    has been differentiated with a Gaussian of that width.
    """
    if beta <= 0:
        return BESSEL_J1_FIRST_MAX
    u = np.linspace(-8 * beta, 8 * beta, 4001)
    kernel = np.exp(-0.5 * (u / beta) ** 2)
    kernel /= kernel.sum()

    def neg(x):
        z = x - u
        return -np.sum(kernel * np.sign(z) * j1(np.abs(z)))

    res = minimize_scalar(neg, bounds=(0.5, 3.5), method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x)


def _half_decay_lag(curve: np.ndarray) -> float | None:
    top = curve[0]
    below = np.nonzero(curve < 0.5 * top)[0]
    if not top > 0 or below.size == 0 or below[0] == 0:
        return None
    i = below[0]
    return i - 1 + (curve[i - 1] - 0.5 * top) / (curve[i - 1] - curve[i])


def estimate_speed(result: AcfResult, k: float,
                   prominence_floor: float = PROMINENCE_FLOOR,
                   smooth_bessel: float = SMOOTH_BESSEL) -> SpeedEstimate:
    """Speed from the first prominent valley of the ACF differential.

    The differential is taken with a derivative-of-Gaussian whose width is
    ``smooth_bessel`` in units of the Bessel argument ``k v lag``; since
    ``v`` is what we are after, the width starts from the lag where the ACF
    has decayed to half (J0 = 1/2 at 1.5212) and is refined a few times.
    Smoothing moves the J1 extremum from 1.84118 to
    ``smoothed_j1_peak(smooth_bessel)``, which is the constant used in
    ``v = x / (k * valley_lag)``.

    A valley qualifies when its prominence (relative to the largest
    ``|differential|``) is at least ``prominence_floor`` and at least
    ``RELATIVE_PROMINENCE`` of the most prominent valley. The first
    following peak above the floor is located as well. Prominences are
    reported in units of the Bessel argument so they do not scale with
    speed.

    Quasi-static windows return ``NOT_FOUND``: flagged results, an ACF
    that never falls to half its lag-0 value, or no qualifying valley.
    """
    if not k > 0:
        raise ValueError("wave number must be positive")
    if result.flagged or result.acf.size < 4:
        return NOT_FOUND
    step = float(result.lags[1] - result.lags[0])
    a = despike(result.acf)
    if not np.all(np.isfinite(a)):
        return NOT_FOUND
    L = a.size
    mirrored = np.concatenate([a[:0:-1], a])
    lag = _half_decay_lag(gaussian_filter1d(mirrored, 2.0)[L - 1:])
    if lag is None:
        return NOT_FOUND
    xs = smoothed_j1_peak(smooth_bessel)
    lag *= BESSEL_J1_FIRST_MAX / 1.5211811  # half-decay -> valley lag
    for _ in range(SPEED_ITERATIONS):
        sigma = max(0.5, smooth_bessel * lag / xs)
        d = gaussian_filter1d(mirrored, sigma, order=1, mode="nearest")[L - 1:]
        scale = np.max(np.abs(d))
        if not scale > 0:
            return NOT_FOUND
        dn = d / scale
        valleys, props = find_peaks(-dn, prominence=prominence_floor)
        if valleys.size == 0:
            return NOT_FOUND
        prom = props["prominences"]
        keep = prom >= RELATIVE_PROMINENCE * prom.max()
        iv = int(valleys[keep][0])
        valley_prom_n = float(prom[keep][0])
        lag = iv + _parabolic_offset(dn, iv)
        if lag <= 0:
            return NOT_FOUND
    valley_lag = lag * step
    v_hat = xs / (k * valley_lag)
    bessel_unit = k * v_hat * step  # per-lag-sample slope -> per Bessel unit
    peaks, pprops = find_peaks(dn, prominence=prominence_floor)
    after = peaks > iv
    peak_prom = (float(pprops["prominences"][after][0]) * scale / bessel_unit
                 if np.any(after) else 0.0)
    return SpeedEstimate(float(v_hat), float(valley_lag), peak_prom,
                         valley_prom_n * scale / bessel_unit, True)
