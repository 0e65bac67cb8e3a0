"""Relay-feedback auto-tuning of the striker position loop.

The tuner clamps nothing in software: it runs the plant around a hold
angle with gravity compensated and drives the torque with a relay on the
sign of the measured angular velocity. The resulting limit cycle gives the
ultimate gain ``Ku = 4 h / (pi a)`` and period ``Pu`` of the velocity loop
(``h`` relay amplitude, ``a`` velocity amplitude). For an integrating plant
with delay ``L`` the cycle has ``Pu = 4 L`` and ``a = h L / J``, which
yields the inertia estimate ``J = pi Ku Pu / 16``.

Gains then follow Ziegler-Nichols-style fractions of ``Ku``: the derivative
(velocity) gain is ``kd = velocity_fraction * Ku``, the proportional gain
places a critically damped position pole pair at ``sqrt(kp / J)``, and the
integral gain is a further ``integral_ratio`` slower.
"""

import copy
import math

import numpy as np
from sklearn.base import BaseEstimator

from .mallet import mallet_inertia
from .pid import PidController, PidGains
from .plant import Plant


class AutoTuneError(RuntimeError):
    pass


def relay_experiment(plant, hold_torque, amplitude, dt, duration):
    """Run the velocity relay; return ``(times, velocities, torques)`` arrays."""
    n = int(round(duration / dt))
    w = np.empty(n)
    u = np.empty(n)
    torque = hold_torque + amplitude
    for k in range(n):
        plant.step(torque, dt)
        w[k] = plant.omega
        torque = hold_torque - amplitude if plant.omega > 0.0 else hold_torque + amplitude
        u[k] = torque
    return np.arange(1, n + 1) * dt, w, u


def ultimate_point(times, velocities, torques, hold_torque, amplitude, settle=0.5,
                   tolerance=0.05, min_cycles=6):
    """Estimate ``(Ku, Pu)`` from the settled tail of a relay trace."""
    start = int(len(times) * settle)
    sign = np.sign(torques[start:] - hold_torque)
    rising = np.flatnonzero(np.diff(sign) > 0)
    if len(rising) < min_cycles + 1:
        raise AutoTuneError(
            f"relay produced {max(len(rising) - 1, 0)} cycles, need {min_cycles}")
    periods = np.diff(times[start:][rising])
    if periods.std() > tolerance * periods.mean():
        raise AutoTuneError(
            f"relay period did not converge (spread {periods.std() / periods.mean():.1%})")
    tail = velocities[start:]
    half_swing = 0.5 * (tail.max() - tail.min())
    if not half_swing > 0:
        raise AutoTuneError("relay produced no velocity oscillation")
    return float(4 * amplitude / (math.pi * half_swing)), float(periods.mean())


class RelayAutoTuner(BaseEstimator):
    """Estimator wrapper: ``fit(plant)`` runs the relay test and stores ``gains_``."""

    def __init__(self, relay_fraction=0.2, velocity_fraction=0.125, damping=1.0,
                 integral_ratio=5.0, integral_fraction=0.5, tick_period=1e-3,
                 oversample=8, duration=0.05, hold_angle=None):
        self.relay_fraction = relay_fraction
        self.velocity_fraction = velocity_fraction
        self.damping = damping
        self.integral_ratio = integral_ratio
        self.integral_fraction = integral_fraction
        self.tick_period = tick_period
        self.oversample = oversample
        self.duration = duration
        self.hold_angle = hold_angle

    def fit(self, plant, y=None, peak_torque=None):
        """Tune against ``plant`` (a :class:`~bldcstrike.plant.Plant`, left untouched).

        ``peak_torque`` is the drive's torque limit; the relay amplitude and
        the output clamp are fractions of it.
        """
        if peak_torque is None:
            raise TypeError("fit() needs the drive's peak_torque")
        dt = self.tick_period / self.oversample
        peak = peak_torque
        probe = copy.copy(plant)
        # no stops: the clamped mallet only jiggles around the hold angle
        probe.contact_position = probe.upper_stop = None
        if self.hold_angle is not None:
            probe.theta = self.hold_angle
        probe.omega = 0.0
        hold = probe.gravity_moment * math.sin(probe.theta)
        amplitude = self.relay_fraction * peak
        if amplitude <= probe.friction:
            raise AutoTuneError("relay amplitude does not overcome friction")
        t, w, u = relay_experiment(probe, hold, amplitude, dt, self.duration)
        ku, pu = ultimate_point(t, w, u, hold, amplitude)
        inertia = math.pi * ku * pu / 16
        kd = self.velocity_fraction * ku
        kp = kd * kd / (4 * self.damping ** 2 * inertia)
        ki = kp * math.sqrt(kp / inertia) / self.integral_ratio
        self.ultimate_gain_ = ku
        self.ultimate_period_ = pu
        self.inertia_estimate_ = inertia
        self.relay_trace_ = np.column_stack([t, w, u])
        self.gains_ = PidGains(kp=float(kp), ki=float(ki), kd=float(kd),
                               integral_limit=self.integral_fraction * peak,
                               output_limit=peak)
        return self


def auto_tune(geom, motor, cfg, tick_period=1e-3, oversample=8, inertia=None, **params):
    """Relay-tune the position loop for the given striker and check the result."""
    plant = Plant(geom, motor, cfg.gravity, inertia=inertia,
                  angle=cfg.contact_angle + 0.1)
    tuner = RelayAutoTuner(tick_period=tick_period, oversample=oversample, **params)
    gains = tuner.fit(plant, peak_torque=motor.peak_torque).gains_
    check_step_response(gains, geom, motor, cfg, tick_period / oversample,
                        inertia=inertia)
    return gains


def check_step_response(gains, geom, motor, cfg, dt, step=0.005, horizon=0.025,
                        band=0.02, inertia=None):
    """Simulate a small position step; raise AutoTuneError unless it settles in ``horizon``.

    Returns the settling time.
    """
    J = mallet_inertia(geom) + motor.rotor_inertia if inertia is None else inertia
    plant = Plant(geom, motor, cfg.gravity, inertia=J, angle=cfg.contact_angle + 0.1)
    pid = PidController(gains)
    start = plant.theta
    target = start + step
    G = plant.gravity_moment
    torque = G * math.sin(start)
    n = int(round(3 * horizon / dt))
    err = np.empty(n)
    lim = motor.peak_torque
    for k in range(n):
        plant.step(torque, dt)
        err[k] = target - plant.theta
        u = G * math.sin(target) + pid.step(target, plant.theta, dt)
        torque = max(-lim, min(lim, u))
    if not np.all(np.isfinite(err)) or abs(err[-1]) > band * step:
        raise AutoTuneError("tuned loop did not settle")
    outside = np.flatnonzero(np.abs(err) > band * step)
    settle = (outside[-1] + 1) * dt if len(outside) else 0.0
    if settle > horizon:
        raise AutoTuneError(f"tuned loop settles in {settle * 1e3:.2f} ms, "
                            f"limit {horizon * 1e3:.2f} ms")
    return settle
