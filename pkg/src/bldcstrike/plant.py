"""Rigid striker plant: one rotational degree of freedom with hard stops.

Sign convention: angle and torque both increase away from the downward
vertical, so the motor strikes with negative torque and gravity pulls the
mallet toward zero::

    J * theta'' = tau - G sin(theta) - M_f sign(theta')

where ``G`` is the gravity moment and ``M_f`` the friction torque. The key
is an inelastic stop at the contact angle; an optional upper stop models
the mechanical limit used for homing.
"""

import math
from dataclasses import dataclass

from .mallet import friction_torque, mallet_inertia


class PlantFault(RuntimeError):
    """Raised when the integrator produces a non-finite state."""


@dataclass(frozen=True)
class PlantState:
    angle: float
    angular_velocity: float = 0.0
    motor_current: float = 0.0
    sim_time: float = 0.0
    # speed at which the mallet hit a stop during the last step, else 0
    impact_speed: float = 0.0


class Plant:
    """Mutable plant used inside servo loops; ``plant_step`` wraps it functionally."""

    __slots__ = ("inertia", "gravity_moment", "friction", "torque_constant",
                 "contact_position", "upper_stop", "theta", "omega", "current", "time",
                 "impact_time")

    def __init__(self, geom, motor, gravity=9.81, contact_position=None, upper_stop=None,
                 inertia=None, angle=0.0):
        self.inertia = (mallet_inertia(geom) + motor.rotor_inertia) if inertia is None else inertia
        self.gravity_moment = geom.mass_moment * gravity
        self.friction = friction_torque(motor)
        self.torque_constant = motor.torque_constant
        self.contact_position = contact_position
        self.upper_stop = upper_stop
        self.theta = float(angle)
        self.omega = 0.0
        self.current = 0.0
        self.time = 0.0
        self.impact_time = None  # stop-crossing instant of the latest impact

    def load(self, state):
        self.theta = state.angle
        self.omega = state.angular_velocity
        self.current = state.motor_current
        self.time = state.sim_time

    def state(self, impact=0.0):
        return PlantState(self.theta, self.omega, self.current, self.time, impact)

    def step(self, torque, dt):
        """Advance by ``dt``; return the impact speed if a stop was hit, else 0."""
        theta, omega = self.theta, self.omega
        drive = torque - self.gravity_moment * math.sin(theta)
        fric = self.friction
        J = self.inertia
        if omega == 0.0:
            if abs(drive) <= fric:
                new_omega = 0.0
            else:
                new_omega = (drive - math.copysign(fric, drive)) / J * dt
        else:
            new_omega = omega + (drive - math.copysign(fric, omega)) / J * dt
            # friction alone may not reverse the motion
            if new_omega * omega < 0.0 and abs(drive) <= fric:
                new_omega = 0.0
        new_theta = theta + new_omega * dt

        impact = 0.0
        lo = self.contact_position
        if lo is not None and new_theta <= lo:
            # resting on the key and pushing into it is not a new impact
            if theta > lo and new_omega < 0.0:
                impact = -new_omega
                self.impact_time = self.time + dt * (theta - lo) / (theta - new_theta)
            new_theta, new_omega = lo, 0.0
        hi = self.upper_stop
        if hi is not None and new_theta >= hi:
            if theta < hi and new_omega > 0.0:
                impact = new_omega
                self.impact_time = self.time + dt * (hi - theta) / (new_theta - theta)
            new_theta, new_omega = hi, 0.0

        if not (math.isfinite(new_theta) and math.isfinite(new_omega)):
            raise PlantFault(f"non-finite plant state at t={self.time:.6f}s")
        self.theta, self.omega = new_theta, new_omega
        self.current = torque / self.torque_constant
        self.time += dt
        return impact


def plant_step(state, applied_torque, geom, motor, dt, gravity=9.81,
               contact_position=None, upper_stop=None):
    """One semi-implicit Euler step from ``state`` under ``applied_torque``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not all(math.isfinite(v) for v in (state.angle, state.angular_velocity, applied_torque)):
        raise PlantFault("non-finite plant input")
    plant = Plant(geom, motor, gravity, contact_position, upper_stop)
    plant.load(state)
    impact = plant.step(applied_torque, dt)
    return plant.state(impact)
