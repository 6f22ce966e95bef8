import numpy as np
import pytest
from scipy.special import j0

from gaitprox.spectral import (BESSEL_J1_FIRST_MAX, AcfResult, acf_per_subcarrier,
                               combine_acf, combine_acf_batch, despike, estimate_speed,
                               smoothed_j1_peak, wave_number)
from oracles import K_5180, j0_acf, j0_series

STEP = 1 / 1500


def acf_result(acf):
    return combine_acf(np.asarray(acf)[:, None], STEP)


def test_j0_oracle_agrees_with_scipy():
    xs = np.linspace(0, 20, 41)
    assert np.max(np.abs([j0_series(x) for x in xs] - j0(xs))) < 1e-12


# wave number ----------------------------------------------------------

def test_wave_number_values():
    assert wave_number(5.18e9) == pytest.approx(108.5647, abs=1e-3)
    assert wave_number(299_792_458.0) == pytest.approx(2 * np.pi, rel=1e-15)
    assert wave_number(2e9) == pytest.approx(2 * wave_number(1e9), rel=1e-15)
    with pytest.raises(ValueError):
        wave_number(0)


# ACF ------------------------------------------------------------------

def test_acf_of_sinusoid():
    P = 40
    n = 20 * P
    x = np.sin(2 * np.pi * np.arange(n) / P)
    acf, valid = acf_per_subcarrier(x[:, None], P)
    assert valid[0]
    assert acf[0, 0] == pytest.approx(1.0)
    assert acf[P // 2, 0] == pytest.approx(-1.0, abs=0.05)
    assert acf[P, 0] == pytest.approx(1.0, abs=0.05)


def test_acf_matches_direct_formula():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(120, 3))
    acf, _ = acf_per_subcarrier(x, 40)
    m = x.mean(axis=0)
    s2 = ((x - m) ** 2).mean(axis=0)
    for lag in range(41):
        ref = ((x[:120 - lag] - m) * (x[lag:] - m)).sum(axis=0) / ((120 - lag) * s2)
        assert np.allclose(acf[lag], ref, atol=1e-12)


def test_acf_white_noise_bound():
    rng = np.random.default_rng(7)
    n, L = 600, 50
    inside = 0
    total = 0
    for _ in range(100):
        acf, _ = acf_per_subcarrier(rng.normal(size=(n, 1)), L)
        inside += np.sum(np.abs(acf[1:, 0]) < 4 / np.sqrt(n))
        total += L
    assert inside / total >= 0.95


def test_acf_constant_column_excluded():
    x = np.column_stack([np.ones(100), np.sin(np.arange(100) / 3)])
    acf, valid = acf_per_subcarrier(x, 20)
    assert valid.tolist() == [False, True]
    assert np.all(acf[:, 0] == 0)
    res = combine_acf(acf, STEP, valid=valid)
    assert res.per_subcarrier_weight[0] == 0
    assert res.acf[0] == pytest.approx(1.0)


def test_acf_rejects_long_lag():
    with pytest.raises(ValueError):
        acf_per_subcarrier(np.ones((10, 1)), 6)


def test_combine_single_and_identical():
    _, a = j0_acf(1.0)
    single = combine_acf(a[:, None], STEP)
    assert np.allclose(single.acf, a)
    double = combine_acf(np.column_stack([a, a]), STEP)
    assert np.allclose(double.acf, a)
    assert np.allclose(double.per_subcarrier_weight, [0.5, 0.5])


def test_combined_closer_than_worst_subcarrier():
    rng = np.random.default_rng(4)
    _, a = j0_acf(1.0)
    noisy = np.column_stack([a + rng.normal(0, s, a.size) for s in (0.02, 0.1, 0.3)])
    noisy[0] = 1.0
    res = combine_acf(noisy, STEP)
    err = np.linalg.norm(res.acf - a)
    worst = max(np.linalg.norm(noisy[:, i] - a) for i in range(3))
    assert err < worst


def test_combine_all_weights_zero_is_flagged():
    acf = np.zeros((10, 2))
    acf[0] = 1
    acf[1] = -0.3
    res = combine_acf(acf, STEP)
    assert res.flagged and np.all(res.acf == 0)
    assert not estimate_speed(res, K_5180).found


def test_combine_motion_floor():
    _, a = j0_acf(1.0)
    res = combine_acf(a[:, None] * np.array([[1.0]]), STEP, motion_floor=1.5)
    assert res.flagged


def test_batch_combine_matches_single():
    rng = np.random.default_rng(9)
    acf = rng.uniform(-0.5, 1, size=(4, 20, 3))
    acf[:, 0] = 1
    valid = np.ones((4, 3), bool)
    comb, diffs, w, flagged = combine_acf_batch(acf, valid, STEP)
    for i in range(4):
        one = combine_acf(acf[i], STEP, valid=valid[i])
        assert one.flagged == flagged[i]
        if not one.flagged:
            assert np.allclose(one.acf, comb[i])
            assert np.allclose(one.acf_diff, diffs[i])


def test_acf_result_invariants():
    _, a = j0_acf(1.2)
    res = acf_result(a)
    assert isinstance(res, AcfResult)
    assert res.acf_diff.size == res.lags.size - 1
    assert np.all(np.diff(res.lags) > 0) and res.lags[0] == 0
    assert np.all(np.abs(res.acf) <= 1 + 1e-9)
    assert np.allclose(res.diff_lags, res.lags[:-1] + STEP / 2)


def test_despike_extrapolates_lag_zero():
    a = np.array([5.0, 0.9, 0.7, 0.5])
    assert despike(a)[0] == pytest.approx((4 * 0.9 - 0.7) / 3)


# speed ----------------------------------------------------------------

def test_smoothing_shifts_valley_constant():
    assert smoothed_j1_peak(0.0) == BESSEL_J1_FIRST_MAX
    assert smoothed_j1_peak(0.9) > BESSEL_J1_FIRST_MAX


@pytest.mark.parametrize("v", [0.6, 0.9, 1.2, 1.5, 1.8])
def test_speed_inversion_noiseless(v):
    _, a = j0_acf(v)
    est = estimate_speed(acf_result(a), K_5180)
    assert est.found
    assert abs(est.v_hat - v) / v < 0.05
    assert est.valley_prominence > 0 and est.peak_prominence > 0


def test_speed_example_at_1_2():
    _, a = j0_acf(1.2, k=108.5)
    est = estimate_speed(acf_result(a), 108.5)
    assert est.v_hat == pytest.approx(1.2, rel=0.05)


def test_speed_with_noise():
    rng = np.random.default_rng(2024)
    _, a = j0_acf(1.2)
    good = 0
    for _ in range(100):
        est = estimate_speed(acf_result(a + rng.normal(0, 0.05, a.size)), K_5180)
        good += est.found and abs(est.v_hat - 1.2) / 1.2 < 0.10
    assert good >= 90


def test_flat_acf_not_found():
    rng = np.random.default_rng(1)
    flat = np.ones(151) + rng.normal(0, 0.001, 151)
    est = estimate_speed(acf_result(flat), K_5180)
    assert not est.found and est.v_hat == 0
    assert est.peak_prominence == 0 and est.valley_prominence == 0


def test_speed_scale_invariant():
    _, a = j0_acf(1.1)
    base = estimate_speed(acf_result(a), K_5180)
    for alpha in (0.01, 0.3, 7.0):
        res = AcfResult(0.0, np.arange(a.size) * STEP, alpha * a, np.zeros(a.size - 1),
                        np.ones(1))
        assert estimate_speed(res, K_5180).v_hat == pytest.approx(base.v_hat, rel=1e-9)


def test_valley_lag_monotone_in_speed():
    lags = [estimate_speed(acf_result(j0_acf(v)[1]), K_5180).valley_lag
            for v in (0.6, 0.9, 1.2, 1.5, 1.8)]
    assert all(a > b for a, b in zip(lags, lags[1:]))


def test_estimate_speed_rejects_bad_k():
    with pytest.raises(ValueError):
        estimate_speed(acf_result(j0_acf(1.0)[1]), 0.0)
