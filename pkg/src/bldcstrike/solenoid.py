"""Open-loop solenoid striker used as the comparison actuator.

The solenoid has no position feedback: its impact speed is an affine
function of velocity up to a saturation velocity and flat beyond it, and
every stroke is scaled by unit-mean lognormal noise. A stroke occupies the
actuator for ``drive_time + return_time``; a note arriving before that has
elapsed misses.
"""

import math
from dataclasses import dataclass

import numpy as np

from .controller import OrderingError, StrikeEvent, StrikerStatus
from .validation import check_midi_velocity, check_positive


@dataclass(frozen=True)
class SolenoidSpec:
    max_force_torque: float  # Nm equivalent at the mallet pivot
    saturation_velocity: int = 80
    noise_sigma: float = 0.15
    min_spl_floor: float = 73.0  # dB the floor speed was calibrated to
    floor_speed: float = 0.1  # rad/s at velocity 1
    inertia: float = 5.55e-4  # kg m^2 moved by the plunger
    drive_time: float = 0.030
    return_time: float = 0.090

    def __post_init__(self):
        check_positive(self.max_force_torque, "max_force_torque")
        if not 1 <= self.saturation_velocity <= 127:
            raise ValueError("saturation_velocity must lie in 1..127")
        check_positive(self.noise_sigma, "noise_sigma", allow_zero=True)
        check_positive(self.floor_speed, "floor_speed", allow_zero=True)
        check_positive(self.inertia, "inertia")
        check_positive(self.drive_time, "drive_time")
        check_positive(self.return_time, "return_time")
        if self.floor_speed > self.saturation_speed:
            raise ValueError("floor_speed exceeds the saturation speed")

    @property
    def saturation_speed(self):
        """Speed reached when full force acts for the whole drive time."""
        return self.max_force_torque * self.drive_time / self.inertia

    @property
    def cycle_time(self):
        return self.drive_time + self.return_time


def mean_impact_speed(spec, vel):
    vel = check_midi_velocity(vel)
    if vel >= spec.saturation_velocity:
        return spec.saturation_speed
    span = max(spec.saturation_velocity - 1, 1)
    return spec.floor_speed + (vel - 1) / span * (spec.saturation_speed - spec.floor_speed)


def solenoid_step(spec, vel, rng=None):
    """Impact speed of one open-loop stroke.

    ``rng`` is a seed or a ``numpy.random.Generator``; the noise factor is
    lognormal with unit mean.
    """
    speed = mean_impact_speed(spec, vel)
    sigma = spec.noise_sigma
    if sigma == 0:
        return speed
    rng = np.random.default_rng(rng)
    return speed * math.exp(sigma * rng.standard_normal() - 0.5 * sigma * sigma)


class SolenoidStriker:
    """Drop-in for :class:`~bldcstrike.controller.Striker` inside a tick loop."""

    def __init__(self, index, spec, rng=None, tick_period=1e-3):
        self.index = index
        self.spec = spec
        self.rng = np.random.default_rng(rng)
        self.tick_period = tick_period
        self.status = StrikerStatus.UNHOMED
        self._stroke = None

    def home(self):
        # nothing to zero: the plunger rests on its return spring
        if self.status not in (StrikerStatus.UNHOMED, StrikerStatus.IDLE):
            raise OrderingError(f"cannot home from {self.status.value}")
        self.status = StrikerStatus.IDLE
        return self.status

    def dispatch(self, velocity, tick):
        if self.status is not StrikerStatus.IDLE:
            raise OrderingError(f"striker {self.index} is {self.status.value}, not idle")
        tp = self.tick_period
        speed = solenoid_step(self.spec, velocity, self.rng)
        hit = tick * tp + self.spec.drive_time
        free = tick * tp + self.spec.cycle_time
        self._stroke = (tick, velocity, speed, hit, free)
        self.status = StrikerStatus.STRIKING
        return StrikeEvent(tick, self.index, "dispatch", 0.0, tick * tp, velocity)

    @property
    def quiescent(self):
        return self._stroke is None

    def skip(self, ticks):
        pass

    def advance(self, tick):
        if self._stroke is None:
            return []
        tp = self.tick_period
        start, velocity, speed, hit, free = self._stroke
        end = (tick + 1) * tp
        events = []
        if self.status is StrikerStatus.STRIKING and hit < end - 1e-12:
            events.append(StrikeEvent(start + int(round((hit - start * tp) / tp)), self.index,
                                      "contact", speed, hit, velocity))
            self.status = StrikerStatus.LIFTING
        if self.status is StrikerStatus.LIFTING and free <= end + 1e-12:
            events.append(StrikeEvent(tick + 1, self.index, "idle", time=end))
            self.status = StrikerStatus.IDLE
            self._stroke = None
        return events
