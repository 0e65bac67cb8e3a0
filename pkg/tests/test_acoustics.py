import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.base import clone

from bldcstrike.acoustics import (AcousticConfig, LiveMeter, SplMeter, impact_to_intensity,
                                  intensity_to_spl, meter_process, reading_after, readings,
                                  render_intensity, spl_to_intensity)

# mpmath oracle: 1e-12 * 10^(dB/10)
I_83 = 1.9952623149688796e-4
I_55 = 3.1622776601683794e-7


@pytest.fixture
def ac():
    return AcousticConfig(coupling_k=6.28552e-05)


def test_impact_to_intensity(ac):
    assert impact_to_intensity(0.0, ac) == 0.0
    assert impact_to_intensity(4.0, ac) == 2 * impact_to_intensity(2.0, ac)
    with pytest.raises(ValueError):
        impact_to_intensity(-1.0, ac)


def test_spl_conversions():
    assert intensity_to_spl(1e-12) == 0.0
    assert spl_to_intensity(83.0) == pytest.approx(I_83, rel=1e-12)
    assert spl_to_intensity(55.0) == pytest.approx(I_55, rel=1e-12)
    assert intensity_to_spl(I_83) == pytest.approx(83.0)
    for bad in (0.0, -1.0, math.nan):
        with pytest.raises(ValueError):
            intensity_to_spl(bad)
    np.testing.assert_allclose(spl_to_intensity(np.array([55.0, 83.0])), [I_55, I_83])


@given(st.floats(1e-15, 1e3))
def test_spl_round_trip(i):
    assert spl_to_intensity(intensity_to_spl(i)) == pytest.approx(i, rel=1e-12)


def test_silence_reads_room_noise(ac):
    times, inten = render_intensity([], 10.0, ac)
    marks, spl = meter_process(times, inten, ac)
    assert len(marks) == 20 and marks[0] == 0.5
    assert np.all(np.abs(spl - 55.0) <= 0.1)


def test_single_impulse_decays_with_slow_time_constant():
    # near-instant bar and a fine display step isolate the meter's own decay
    cfg = AcousticConfig(coupling_k=1.0, decay_time=1e-3, resolution_db=1e-9)
    times, inten = render_intensity([(0.2, 1e-3)], 6.0, cfg)
    marks, spl = meter_process(times, inten, cfg)
    excess = spl_to_intensity(spl) - cfg.noise_intensity
    ratios = excess[1:] / excess[:-1]
    np.testing.assert_allclose(ratios, math.exp(-0.5), rtol=1e-3)


@given(st.floats(1e-9, 1e-2), st.floats(1e-9, 1e-2))
def test_meter_monotone_in_steady_input(a, b):
    cfg = AcousticConfig(coupling_k=1.0, resolution_db=1e-9)
    t = np.arange(1, 5001) / 1000.0
    lo, hi = sorted((a, b))
    _, s_lo = meter_process(t, np.full_like(t, lo), cfg)
    _, s_hi = meter_process(t, np.full_like(t, hi), cfg)
    assert s_lo[-1] <= s_hi[-1]


def test_meter_rejects_bad_streams(ac):
    with pytest.raises(ValueError):
        meter_process([0.2, 0.1], [0.0, 0.0], ac)
    with pytest.raises(ValueError):
        meter_process([0.1, 0.2], [0.0, -1.0], ac)
    with pytest.raises(ValueError):
        meter_process([0.1, 0.2], [0.0], ac)
    assert len(meter_process([], [], ac)[0]) == 0


def test_irregular_sampling_matches_exact_solution():
    cfg = AcousticConfig(coupling_k=1.0, resolution_db=1e-9)
    rng = np.random.default_rng(3)
    t = np.cumsum(rng.uniform(1e-3, 3e-2, 400))
    p = 1e-4
    marks, spl = meter_process(t, np.full_like(t, p), cfg)
    noise = cfg.noise_intensity
    # first-order lag from the noise floor toward noise + p
    idx = np.searchsorted(t, marks + 1e-9, side="right") - 1
    exact = noise + p * (1 - np.exp(-t[idx]))
    np.testing.assert_allclose(spl_to_intensity(spl), exact, rtol=1e-6)


def test_reading_after():
    marks = np.array([0.5, 1.0, 1.5, 2.0])
    spl = np.array([55.0, 70.0, 68.0, 60.0])
    assert reading_after(marks, spl, 0.6) == 70.0
    assert reading_after(marks, spl, 1.0) == 68.0
    assert reading_after(marks, spl, 2.0) is None


def test_live_meter_matches_batch(ac):
    hits = [(0.0123, 1e-4), (0.7, 3e-5), (0.7004, 1e-6), (2.31, 2e-4)]
    times, inten = render_intensity(hits, 4.0, ac)
    batch = readings(times, inten, ac)
    live = LiveMeter(ac)
    out = []
    pending = sorted(hits)
    for n in range(1, 4001):
        t = n / 1000.0
        now = [h for h in pending if h[0] <= t + 1e-12]
        pending = pending[len(now):]
        r = live.advance(now)
        if r is not None:
            out.append(r)
    assert [(r.time, r.spl) for r in out] == pytest.approx([(r.time, r.spl) for r in batch])


def test_meter_estimator(ac):
    times, inten = render_intensity([(0.1, 1e-4)], 3.0, ac)
    meter = clone(SplMeter()).fit()
    out = meter.transform(np.column_stack([times, inten]))
    marks, spl = meter_process(times, inten, ac)
    np.testing.assert_array_equal(out, np.column_stack([marks, spl]))
    with pytest.raises(ValueError):
        meter.transform(np.ones((3, 3)))


def test_config_positive():
    with pytest.raises(ValueError):
        AcousticConfig(coupling_k=0.0)
