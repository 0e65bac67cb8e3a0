"""Impact intensity, SPL conversion and a SLOW-weighted sound level meter.

Each impact excites the bar with a peak intensity proportional to the
mallet's impact speed; the sound then decays exponentially. The meter
power-sums room noise with the signal, low-passes the total with a
first-order exponential average and reports a level every sample period.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .validation import check_positive

REFERENCE_INTENSITY = 1e-12  # W/m^2, equivalent to 20 uPa


@dataclass(frozen=True)
class AcousticConfig:
    coupling_k: float  # W/m^2 of peak intensity per rad/s of impact speed
    reference_intensity: float = REFERENCE_INTENSITY
    room_noise_db: float = 55.0
    meter_time_constant: float = 1.0  # SLOW
    sample_period: float = 0.5
    decay_time: float = 0.45  # bar envelope time constant
    sample_rate: float = 1000.0  # rendering rate of the intensity signal
    resolution_db: float = 0.1  # meter display step

    def __post_init__(self):
        for name in ("coupling_k", "reference_intensity", "room_noise_db",
                     "meter_time_constant", "sample_period", "decay_time", "sample_rate",
                     "resolution_db"):
            check_positive(getattr(self, name), name)

    @property
    def noise_intensity(self):
        return spl_to_intensity(self.room_noise_db, self.reference_intensity)


@dataclass(frozen=True)
class IntensitySample:
    time: float
    intensity: float


@dataclass(frozen=True)
class SplReading:
    time: float
    spl: float


def impact_to_intensity(impact_speed, cfg):
    if impact_speed < 0:
        raise ValueError("impact speed must be nonnegative")
    return cfg.coupling_k * impact_speed


def intensity_to_spl(intensity, reference=REFERENCE_INTENSITY):
    intensity = np.asarray(intensity, dtype=float)
    if np.any(~(intensity > 0)):
        raise ValueError("intensity must be positive to express in dB")
    out = 10.0 * np.log10(intensity / reference)
    return float(out) if out.ndim == 0 else out


def spl_to_intensity(spl, reference=REFERENCE_INTENSITY):
    out = reference * np.power(10.0, np.asarray(spl, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def contact_impulses(events, cfg):
    """``(time, peak intensity)`` pairs for the contact events of an event log."""
    return [(e.time, impact_to_intensity(e.impact_speed, cfg))
            for e in events if e.kind == "contact"]


def render_intensity(impulses, duration, cfg):
    """Sample the summed decaying bar envelopes at ``cfg.sample_rate``.

    Returns ``(times, intensity)``; sample ``n`` sits at ``n / sample_rate``
    for ``n = 1 .. N`` and includes every impact at or before it.
    """
    fs = cfg.sample_rate
    n = int(round(duration * fs))
    times = np.arange(1, n + 1) / fs
    drive = np.zeros(n)
    for t, peak in impulses:
        k = max(int(math.ceil(t * fs - 1e-9)), 1)
        if k > n:
            continue
        drive[k - 1] += peak * math.exp(-(k / fs - t) / cfg.decay_time)
    beta = math.exp(-1.0 / (fs * cfg.decay_time))
    return times, lfilter([1.0], [1.0, -beta], drive)


def meter_process(times, intensity, cfg):
    """SLOW-weighted SPL readings for an intensity stream.

    Each sample holds over the interval ending at its timestamp. The meter
    starts settled on room noise. Returns ``(reading_times, spl)``, one reading
    per ``sample_period``, quantized to ``resolution_db``.
    """
    times = np.asarray(times, dtype=float)
    intensity = np.asarray(intensity, dtype=float)
    if times.shape != intensity.shape or times.ndim != 1:
        raise ValueError("times and intensity must be matching 1-D arrays")
    if len(times) == 0:
        return np.empty(0), np.empty(0)
    steps = np.diff(np.concatenate([[0.0], times]))
    if np.any(steps <= 0):
        raise ValueError("samples must be strictly time-ordered after t=0")
    if np.any(intensity < 0):
        raise ValueError("intensity must be nonnegative")
    noise = cfg.noise_intensity
    power = intensity + noise
    tau = cfg.meter_time_constant
    if np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        alpha = math.exp(-steps[0] / tau)
        level, _ = lfilter([1 - alpha], [1.0, -alpha], power, zi=[alpha * noise])
    else:
        level = np.empty_like(power)
        y = noise
        for i, (dt, p) in enumerate(zip(steps, power)):
            alpha = math.exp(-dt / tau)
            y = alpha * y + (1 - alpha) * p
            level[i] = y
    period = cfg.sample_period
    count = int(math.floor(times[-1] / period + 1e-9))
    marks = np.arange(1, count + 1) * period
    idx = np.searchsorted(times, marks + 1e-9, side="right") - 1
    spl = intensity_to_spl(level[idx], cfg.reference_intensity)
    step = cfg.resolution_db
    return marks, np.round(np.atleast_1d(spl) / step) * step


def readings(times, intensity, cfg):
    """Like :func:`meter_process` but as :class:`SplReading` records."""
    marks, spl = meter_process(times, intensity, cfg)
    return [SplReading(float(t), float(s)) for t, s in zip(marks, spl)]


def reading_after(marks, spl, t, window=0.5):
    """Largest reading in ``(t, t + window]``; None if there is none."""
    lo = np.searchsorted(marks, t + 1e-12, side="left")
    hi = np.searchsorted(marks, t + window + 1e-12, side="right")
    if hi <= lo:
        return None
    return float(np.max(spl[lo:hi]))


class SplMeter(TransformerMixin, BaseEstimator):
    """Estimator form of the meter: ``transform`` maps ``[time, intensity]`` rows
    to ``[time, spl]`` readings."""

    def __init__(self, room_noise_db=55.0, meter_time_constant=1.0, sample_period=0.5,
                 resolution_db=0.1, reference_intensity=REFERENCE_INTENSITY):
        self.room_noise_db = room_noise_db
        self.meter_time_constant = meter_time_constant
        self.sample_period = sample_period
        self.resolution_db = resolution_db
        self.reference_intensity = reference_intensity

    def fit(self, X=None, y=None):
        # coupling and decay do not affect metering; placeholders keep the config valid
        self.config_ = AcousticConfig(coupling_k=1.0, **self.get_params())
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X, ensure_min_samples=1)
        if X.shape[1] != 2:
            raise ValueError("expected columns [time, intensity]")
        marks, spl = meter_process(X[:, 0], X[:, 1], self.config_)
        return np.column_stack([marks, spl])


class LiveMeter:
    """Incremental twin of :func:`render_intensity` + :func:`meter_process`.

    Call :meth:`advance` once per rendering sample with the impacts that
    occurred since the previous one; a reading is returned whenever a sample
    period completes, else None.
    """

    def __init__(self, cfg):
        self.cfg = cfg
        self.dt = 1.0 / cfg.sample_rate
        self._beta = math.exp(-self.dt / cfg.decay_time)
        self._alpha = math.exp(-self.dt / cfg.meter_time_constant)
        self._noise = cfg.noise_intensity
        self._per_reading = int(round(cfg.sample_period * cfg.sample_rate))
        self.n = 0
        self.envelope = 0.0
        self.level = self._noise

    def advance(self, impulses=()):
        self.n += 1
        t = self.n * self.dt
        env = self.envelope * self._beta
        for when, peak in impulses:
            env += peak * math.exp(-(t - when) / self.cfg.decay_time)
        self.envelope = env
        a = self._alpha
        self.level = a * self.level + (1 - a) * (env + self._noise)
        if self.n % self._per_reading:
            return None
        spl = intensity_to_spl(self.level, self.cfg.reference_intensity)
        step = self.cfg.resolution_db
        return SplReading(t, round(spl / step) * step)
