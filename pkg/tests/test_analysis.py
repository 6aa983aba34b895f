import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metamolecule.analysis import (
    TimeSeries,
    compare,
    energy_rate,
    regime_stats,
    regime_switches,
    rolling_activity,
    spectrum,
    window_amplitudes,
)

T = np.round(np.arange(1001) * 0.1, 10)


def series(**chans):
    return TimeSeries(T, chans)


def test_timeseries_validation():
    with pytest.raises(ValueError):
        TimeSeries([0.0, 0.1, 0.3], {})
    with pytest.raises(ValueError):
        TimeSeries([0.0, 0.1], {"sx": [1.0]})
    s = series(sx=np.zeros_like(T))
    assert s.dt == pytest.approx(0.1)
    assert s.window(2, 18).sum() == 161


def test_energy_rate_examples():
    assert np.all(energy_rate(np.full(50, 2.5), 0.1) == 0.0)
    E = np.sin(0.05 * T)
    d = energy_rate(E, 0.1)
    np.testing.assert_allclose(d[1:-1], (E[2:] - E[:-2]) / 0.2, rtol=0, atol=1e-15)
    # central-difference remainder h^2/6 max|E'''|
    bound = 0.1**2 / 6 * 0.05**3
    assert np.max(np.abs(d[1:-1] - 0.05 * np.cos(0.05 * T[1:-1]))) <= bound * (1 + 1e-3)
    with pytest.raises(ValueError):
        energy_rate([1.0, 2.0], 0.1)
    s = series(e_total=T**2)
    np.testing.assert_allclose(energy_rate(s)[1:-1], 2 * T[1:-1], atol=1e-10)


def test_energy_rate_inverts_cumulative_integral():
    rate = np.cos(0.3 * T) + 0.2 * np.sin(1.1 * T)
    # trapezoid cumulative integral
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * 0.1)])
    back = energy_rate(cum, 0.1)
    assert np.max(np.abs(back[1:-1] - rate[1:-1])) <= 0.02 * 0.1**2 * 10


def test_spectrum_single_tone():
    (w, a), *_ = spectrum(np.cos(0.81 * T), T)
    assert abs(w - 0.81) <= 2 * math.pi / 100
    assert a == pytest.approx(1.0, rel=0.1)


def test_spectrum_two_tones():
    peaks = spectrum(np.cos(0.81 * T) + 0.3 * np.cos(0.05 * T), T)
    freqs = [w for w, _ in peaks[:2]]
    assert abs(freqs[0] - 0.81) <= 2 * math.pi / 100
    assert min(abs(f - 0.05) for f in freqs) <= 2 * math.pi / 100
    assert peaks[1][0] <= 0.07


@given(st.floats(-100, 100))
@settings(max_examples=25)
def test_spectrum_offset_invariant(offset):
    x = np.cos(0.81 * T) + 0.4 * np.sin(0.33 * T)
    a = spectrum(x, T)[:3]
    b = spectrum(x + offset, T)[:3]
    for (wa, _), (wb, _) in zip(a, b):
        assert wa == pytest.approx(wb, abs=1e-9)


def test_spectrum_errors():
    with pytest.raises(ValueError):
        spectrum(np.zeros_like(T), T, window=(50, 150))
    with pytest.raises(ValueError):
        spectrum(np.zeros(30), T[:30])


def test_regime_stats():
    assert regime_stats(np.full_like(T, 0.4), T, [(0, 100)]) == [(pytest.approx(0.4), 0.0)]
    square = np.where(T < 50, -0.25, 0.25)
    ripple = 0.1 * np.cos(2 * math.pi * T)  # whole periods in each window
    (m1, a1), (m2, a2) = regime_stats(square + ripple, T, [(0, 49.9), (50, 99.9)])
    assert abs(m1 + 0.25) <= 1e-12 and abs(m2 - 0.25) <= 1e-12
    assert a1 == pytest.approx(0.1, abs=1e-3)
    with pytest.raises(ValueError):
        regime_stats(square, T, [(200, 300)])


def test_window_amplitudes():
    ints, amps = window_amplitudes(np.where(T < 50, np.sin(T), 0.0), T, 10.0)
    assert len(ints) == 10
    assert np.all(amps[:5] > 0.9) and np.all(amps[5:] == 0.0)


def test_regime_switches_on_synthetic_envelope():
    env = np.where((T > 20) & (T < 40) | (T > 80), 0.5, 0.05)
    x = env * np.cos(0.8 * T)
    act = rolling_activity(x, T, 10.0)
    switches, lab = regime_switches(act, T)
    assert len(switches) == 3
    for s, ref in zip(switches, (20, 40, 80)):
        assert abs(s - ref) <= 5
    with pytest.raises(ValueError):
        rolling_activity(x, T, 10.0, kind="median")


def test_compare_examples():
    a = series(sx=np.sin(T))
    assert compare(a, a, "sx").rmse == 0.0
    b = series(sx=np.sin(T) + 0.01)
    c = compare(a, b, "sx")
    assert c.rmse == pytest.approx(0.01) and c.max_abs == pytest.approx(0.01)
    with pytest.raises(ValueError):
        compare(a, TimeSeries(T[:10], {"sx": np.zeros(10)}), "sx")


arrays = st.lists(st.floats(-1, 1), min_size=len(T), max_size=len(T)).map(np.array)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_compare_symmetric_and_triangle(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (series(sx=rng.normal(size=len(T))) for _ in range(3))
    assert compare(a, b, "sx") == compare(b, a, "sx")
    assert compare(a, c, "sx").max_abs <= compare(a, b, "sx").max_abs + compare(b, c, "sx").max_abs + 1e-15
