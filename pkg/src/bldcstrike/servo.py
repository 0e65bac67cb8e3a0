"""One striker's drive: position loop, model feedforward and current limiting.

The drive interpolates the active motion profile at every servo substep
(``tick_period / oversample``). Torque computed from the measurement at
substep ``k`` is applied during substep ``k + 1``, which is the one-sample
computation delay a real drive has.
"""

import math

from .mallet import friction_torque, mallet_inertia
from .pid import PidController
from .plant import Plant
from .protection import OvercurrentMonitor


class ServoAxis:
    def __init__(self, geom, motor, strike_cfg, gains, tick_period=1e-3, oversample=8,
                 i2t_limit=math.inf, cooldown=2.0, upper_stop=None, angle=None,
                 plant_inertia=None, contact_position=None):
        if oversample < 4:
            raise ValueError("servo must oversample the tick at least 4x")
        self.motor = motor
        self.tick_period = tick_period
        self.oversample = oversample
        self.dt = tick_period / oversample
        model_inertia = mallet_inertia(geom) + motor.rotor_inertia
        self.model_inertia = model_inertia
        self.model_gravity = geom.mass_moment * strike_cfg.gravity
        self.model_friction = friction_torque(motor)
        contact = strike_cfg.contact_angle if contact_position is None else contact_position
        self.plant = Plant(geom, motor, strike_cfg.gravity, contact_position=contact,
                           upper_stop=upper_stop,
                           inertia=model_inertia if plant_inertia is None else plant_inertia,
                           angle=contact if angle is None else angle)
        self.pid = PidController(gains)
        self.torque_limit = motor.peak_torque
        self.monitor = OvercurrentMonitor(motor.nominal_current, i2t_limit, cooldown)
        self.encoder_offset = 0.0
        self.torque = 0.0  # applied during the next substep
        self.profile = None
        self.profile_start = 0.0
        self.hold = self.measured_angle
        self.enabled = True
        # net torque impulse delivered to the mallet since the last command
        self.impulse = 0.0

    @property
    def measured_angle(self):
        return self.plant.theta - self.encoder_offset

    @property
    def time(self):
        return self.plant.time

    @property
    def tripped(self):
        return self.monitor.tripped

    def command(self, profile, start_time=None):
        """Start following ``profile`` (angles in encoder coordinates)."""
        self.profile = profile
        self.profile_start = self.plant.time if start_time is None else start_time
        self.impulse = 0.0

    def hold_at(self, angle):
        self.profile = None
        self.hold = angle

    def profile_time(self):
        return self.plant.time - self.profile_start

    def reference(self):
        if self.profile is None:
            return self.hold, 0.0, 0.0
        return self.profile.reference(self.plant.time - self.profile_start)

    def substep(self):
        """Advance one servo sample. Returns the impact speed (0 if none)."""
        plant = self.plant
        drive = self.torque - self.model_gravity * math.sin(plant.theta)
        fric = self.model_friction
        if plant.omega != 0.0:
            self.impulse += (drive - math.copysign(fric, plant.omega)) * self.dt
        elif abs(drive) > fric:
            self.impulse += (drive - math.copysign(fric, drive)) * self.dt
        impact = plant.step(self.torque, self.dt)
        if self.monitor.update(plant.current, self.dt) or not self.enabled:
            self.torque = 0.0
            return impact
        pos, vel, acc = self.reference()
        ff = self.model_inertia * acc + self.model_gravity * math.sin(pos + self.encoder_offset)
        if vel > 0.0:
            ff += self.model_friction
        elif vel < 0.0:
            ff -= self.model_friction
        u = ff + self.pid.step(pos, plant.theta - self.encoder_offset, self.dt)
        lim = self.torque_limit
        self.torque = lim if u > lim else (-lim if u < -lim else u)
        return impact

    def run_for(self, seconds):
        """Step for ``seconds`` (rounded to substeps); returns the largest impact."""
        worst = 0.0
        for _ in range(int(round(seconds / self.dt))):
            worst = max(worst, self.substep())
        return worst
