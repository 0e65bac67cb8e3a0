"""Experiment harness: dynamic-range and repetition-speed sweeps, line fits, reports."""

import copy
import math
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .acoustics import contact_impulses, meter_process, reading_after, render_intensity, \
    spl_to_intensity
from .controller import Striker, TickLoop, TickScheduler
from .gateway import NoteEvent, Router, map_pitch
from .servo import ServoAxis
from .solenoid import SolenoidStriker
from .validation import check_velocity_array

CSV_HEADER = "velocity,stroke_index,spl_db,intensity_w_m2,contact_tick"
ACTUATORS = ("bldc", "solenoid")


@dataclass(frozen=True)
class SweepRecord:
    velocity: int
    stroke_index: int
    spl: float  # dB
    intensity: float  # W/m^2
    contact_tick: int  # -1 if the stroke never reached the key


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual_norm: float


@dataclass(frozen=True)
class SpeedResult:
    max_rate: float  # last rate at which every stroke landed, Hz
    failure_mode: str  # power_cutoff, fail_of_hit or none
    trials: tuple  # (rate, contacts, notes, mode) per trial


# -- rigs -----------------------------------------------------------------

def build_striker(cfg, index=0, inertia_scale=1.0, compensate=None, home=True):
    """A BLDC striker from ``cfg``; homed unless ``home`` is false."""
    sv = cfg.servo
    servo = ServoAxis(cfg.geometry, cfg.motor, cfg.strike, cfg.gains, sv.tick_period,
                      sv.oversample, i2t_limit=sv.i2t_limit, cooldown=sv.i2t_cooldown,
                      upper_stop=cfg.upper_stop, plant_inertia=cfg.inertia * inertia_scale)
    ctl = cfg.controller
    if compensate is not None:
        ctl = replace(ctl, compensate=compensate)
    striker = Striker(index, servo, cfg.profiler, ctl)
    if home:
        striker.home()
    return striker


def build_actuator(cfg, actuator, index=0, seed=None):
    if actuator == "bldc":
        return build_striker(cfg, index)
    if actuator == "solenoid":
        striker = SolenoidStriker(index, cfg.solenoid, np.random.default_rng(seed),
                                  cfg.servo.tick_period)
        striker.home()
        return striker
    raise ValueError(f"unknown actuator {actuator!r}; choose from {ACTUATORS}")


def stroke_window(cfg):
    """Ticks a BLDC stroke occupies its striker (strike plus lift)."""
    p = cfg.profiler
    return int(math.ceil((p.travel_time + p.lift_time) / cfg.servo.tick_period - 1e-9))


def make_loop(cfg, strikers, window=None):
    sched = TickScheduler(cfg.servo.tick_period, stroke_window(cfg) if window is None else window,
                          cfg.gateway.capacity)
    loop = TickLoop(strikers, sched)
    router = Router(cfg.keymap, sched, cfg.axis_v_max, cfg.axis_a_max)
    return loop, router


def experiment_striker(cfg):
    return map_pitch(cfg.keymap, cfg.bench.pitch).striker_index


def play(cfg, notes, actuator="bldc", seed=0):
    """Run a note list through router, scheduler and strikers; return ``(events, router)``."""
    strikers = {i: build_actuator(cfg, actuator, i, seed=(seed, i)) for i in range(8)}
    loop, router = make_loop(cfg, strikers)
    for note in sorted(notes):
        router.submit(note)
    events = loop.run_to(max((n.tick for n in notes), default=0) + 1)
    events += loop.run_until_idle()
    return events, router


# -- dynamic range --------------------------------------------------------

def sweep_notes(cfg):
    b = cfg.bench
    tp = cfg.servo.tick_period
    first = int(round(b.first_stroke / tp))
    step = int(round(b.stroke_interval / tp))
    out = []
    for v in range(1, 128):
        for k in range(b.strokes_per_velocity):
            out.append(NoteEvent(first + step * ((v - 1) * b.strokes_per_velocity + k),
                                 b.pitch, v))
    return out


def run_dynamic_sweep(cfg, actuator="bldc", seed=0):
    """Six strokes per velocity, 1..127, one stroke per ``stroke_interval``.

    Each stroke is paired with the largest meter reading in the 500 ms after
    its contact; the intensity column is that reading converted back to W/m^2.
    """
    idx = experiment_striker(cfg)
    striker = build_actuator(cfg, actuator, idx, seed)
    loop, router = make_loop(cfg, {idx: striker})
    notes = []
    for note in sweep_notes(cfg):
        scheduled = router.submit(note)
        if scheduled is None:
            raise RuntimeError(f"sweep note {note} was not scheduled")
        notes.append(scheduled)
    end = notes[-1].tick + int(round(cfg.bench.tail / cfg.servo.tick_period))
    events = loop.run_to(end)
    return records_from_events(cfg, notes, events, end * cfg.servo.tick_period)


def records_from_events(cfg, notes, events, duration):
    ac = cfg.acoustics
    tp = cfg.servo.tick_period
    times, intensity = render_intensity(contact_impulses(events, ac), duration, ac)
    marks, spl = meter_process(times, intensity, ac)
    contacts = {}
    for e in events:
        if e.kind == "dispatch":
            contacts[e.tick] = None
            last = e.tick
        elif e.kind == "contact":
            contacts[last] = e
    per_vel = cfg.bench.strokes_per_velocity
    records = []
    for n, note in enumerate(notes):
        contact = contacts.get(note.tick)
        t = contact.time if contact is not None else note.tick * tp
        level = reading_after(marks, spl, t, ac.sample_period)
        records.append(SweepRecord(note.velocity, n % per_vel, level,
                                   spl_to_intensity(level, ac.reference_intensity),
                                   contact.tick if contact is not None else -1))
    return records


def per_velocity(records, field):
    """``(velocities, means, variances)`` of ``field`` grouped by velocity.

    Variances are sample variances; a velocity with one stroke gets NaN.
    """
    groups = {}
    for r in records:
        groups.setdefault(r.velocity, []).append(getattr(r, field))
    vels = np.array(sorted(groups))
    vals = [np.asarray(groups[v], dtype=float) for v in vels]
    return vels, np.array([v.mean() for v in vals]), np.array([v.var(ddof=1) if len(v) > 1 else np.nan for v in vals])


def spl_range(records):
    """Min and max of the per-velocity mean SPL."""
    _, means, _ = per_velocity(records, "spl")
    return float(means.min()), float(means.max())


# -- line fit -------------------------------------------------------------

def _line(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(np.unique(x)) < 2:
        raise ValueError("a line fit needs at least two distinct velocities")
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return FitResult(float(slope), float(intercept), float(np.linalg.norm(resid)))


def fit_intensity_line(records, max_velocity=None):
    """Least-squares line through the mean intensity at each velocity."""
    if max_velocity is not None:
        records = [r for r in records if r.velocity <= max_velocity]
    if not records:
        raise ValueError("no records to fit")
    vels, means, _ = per_velocity(records, "intensity")
    return _line(vels, means)


class IntensityLineFit(RegressorMixin, BaseEstimator):
    """Regressor form of :func:`fit_intensity_line` (``X`` is velocity)."""

    def __init__(self, max_velocity=None):
        self.max_velocity = max_velocity

    def fit(self, X, y):
        vels = check_velocity_array(X).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if len(y) != len(vels):
            raise ValueError("X and y lengths differ")
        keep = vels <= (self.max_velocity or 127)
        vels, y = vels[keep], y[keep]
        uniq = np.unique(vels)
        means = np.array([y[vels == v].mean() for v in uniq])
        fit = _line(uniq, means)
        self.coef_ = fit.slope
        self.intercept_ = fit.intercept
        self.residual_norm_ = fit.residual_norm
        return self

    def predict(self, X):
        check_is_fitted(self)
        return self.coef_ * check_velocity_array(X).ravel() + self.intercept_


# -- repetition speed -----------------------------------------------------

def trial_notes(cfg, rate, start_tick):
    """Strokes at ``rate`` Hz for ``trial_duration`` s, each on the nearest tick."""
    tp = cfg.servo.tick_period
    b = cfg.bench
    n = int(math.ceil(b.trial_duration * rate - 1e-9))
    return [NoteEvent(start_tick + int(round(k / (rate * tp))), b.pitch, b.speed_velocity)
            for k in range(n)]


def run_trial(cfg, striker, rate):
    """One burst at ``rate``; returns ``(contacts, notes, mode)``."""
    idx = striker.index
    loop, router = make_loop(cfg, {idx: striker})
    notes = trial_notes(cfg, rate, loop.tick + 1)
    for note in notes:
        router.submit(note)
    end = notes[-1].tick + stroke_window(cfg) + 1
    contacts = 0
    while loop.tick < end:
        for e in loop.step():
            if e.kind == "fault":
                return contacts, len(notes), "power_cutoff" if e.detail == "overcurrent" \
                    else "fault"
            if e.kind == "contact":
                contacts += 1
    return contacts, len(notes), "fail_of_hit" if contacts < len(notes) else "none"


def rate_steps(start, step, stop):
    k = 0
    while True:
        rate = round(start + k * step, 6)
        if rate > stop + 1e-9:
            return
        yield rate
        k += 1


def run_speed_sweep(cfg, actuator="bldc", seed=0, start_rate=None):
    """Raise the repetition rate in ``rate_step`` increments until a trial fails.

    Every trial starts from a freshly homed, cool actuator.
    """
    b = cfg.bench
    if start_rate is None:
        start_rate = b.bldc_start_rate if actuator == "bldc" else b.solenoid_start_rate
    idx = experiment_striker(cfg)
    prototype = build_actuator(cfg, actuator, idx, seed) if actuator == "bldc" else None
    trials = []
    last_ok = None
    for k, rate in enumerate(rate_steps(start_rate, b.rate_step, b.max_rate)):
        if prototype is not None:
            striker = copy.deepcopy(prototype)
        else:
            striker = build_actuator(cfg, actuator, idx, seed=(seed, k))
        contacts, count, mode = run_trial(cfg, striker, rate)
        trials.append((rate, contacts, count, mode))
        if mode != "none":
            return SpeedResult(last_ok if last_ok is not None else 0.0, mode, tuple(trials))
        last_ok = rate
    return SpeedResult(last_ok, "none", tuple(trials))


# -- reports --------------------------------------------------------------

def format_csv(records):
    lines = [CSV_HEADER]
    for r in records:
        lines.append(f"{r.velocity},{r.stroke_index},{r.spl:.1f},{r.intensity:.5e},"
                     f"{r.contact_tick}")
    return "\n".join(lines) + "\n"


def write_csv(records, path):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_csv(records))


def read_csv(path):
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header!r}")
        out = []
        for line in fh:
            if not line.strip():
                continue
            v, k, spl, inten, tick = line.strip().split(",")
            out.append(SweepRecord(int(v), int(k), float(spl), float(inten), int(tick)))
        return out


def plot_data(records):
    """Two-column texts (velocity, mean) for the SPL and intensity curves."""
    out = {}
    for field, label in (("spl", "spl_db"), ("intensity", "intensity_w_m2")):
        vels, means, _ = per_velocity(records, field)
        body = "".join(f"{v} {m:.6e}\n" for v, m in zip(vels, means))
        out[label] = f"# velocity mean_{label}\n" + body
    return out
