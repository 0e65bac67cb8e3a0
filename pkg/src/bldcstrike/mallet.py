"""Quasi-static torque model of a ball-and-rod mallet on a motor shaft.

Angles are measured from the downward vertical. A positive torque in the
balance below acts in the downstroke direction, so gravity helps the strike
and friction opposes it::

    net = motor + gravity - friction          (downstroke balance)
    motor = net - gravity + friction          (its inverse)
"""

import math
from dataclasses import dataclass

from .validation import check_finite, check_positive


@dataclass(frozen=True)
class MalletGeometry:
    ball_radius: float  # m
    ball_mass: float  # kg
    rod_length: float  # m
    rod_mass: float  # kg

    def __post_init__(self):
        check_positive(self.ball_radius, "ball_radius")
        check_positive(self.rod_length, "rod_length")
        # massless mallets are allowed so the torque terms can be isolated
        check_positive(self.ball_mass, "ball_mass", allow_zero=True)
        check_positive(self.rod_mass, "rod_mass", allow_zero=True)
        if self.ball_radius >= self.rod_length:
            raise ValueError("ball_radius must be smaller than rod_length")

    @property
    def tip_distance(self):
        """Pivot to ball centre."""
        return self.ball_radius + self.rod_length

    @property
    def mass_moment(self):
        """First mass moment about the pivot, kg*m."""
        return self.ball_mass * self.tip_distance + self.rod_mass * self.rod_length / 2


@dataclass(frozen=True)
class MotorSpec:
    torque_constant: float  # Nm/A
    no_load_current: float  # A
    nominal_torque: float  # Nm
    max_current: float  # A
    rotor_inertia: float  # kg*m^2
    diameter: float  # m
    depth: float  # m

    def __post_init__(self):
        for name in ("torque_constant", "nominal_torque", "max_current",
                     "rotor_inertia", "diameter", "depth"):
            check_positive(getattr(self, name), name)
        check_positive(self.no_load_current, "no_load_current", allow_zero=True)
        if self.nominal_torque > self.peak_torque * (1 + 1e-12):
            raise ValueError("nominal_torque exceeds torque_constant * max_current")

    @property
    def peak_torque(self):
        return self.torque_constant * self.max_current

    @property
    def nominal_current(self):
        return self.nominal_torque / self.torque_constant


@dataclass(frozen=True)
class StrikeConfig:
    contact_angle: float = math.pi / 2  # rad from downward vertical
    gravity: float = 9.81

    def __post_init__(self):
        check_finite(self.contact_angle, "contact_angle")
        if not 0.0 <= self.contact_angle <= math.pi:
            raise ValueError("contact_angle must lie in [0, pi]")
        check_positive(self.gravity, "gravity", allow_zero=True)


@dataclass(frozen=True)
class FeasibilityReport:
    required_torque: float
    fits_envelope: bool
    torque_ok: bool

    @property
    def feasible(self):
        return self.fits_envelope and self.torque_ok


def gravity_torque(geom, theta, g=9.81):
    """Gravitational torque about the pivot, ``[m_b(R+L) + m_s L/2] sin(theta) g``."""
    theta = check_finite(theta, "theta")
    g = check_positive(g, "g", allow_zero=True)
    if not 0.0 <= theta <= math.pi:
        raise ValueError(f"theta must lie in [0, pi], got {theta}")
    return geom.mass_moment * math.sin(theta) * g


def friction_torque(motor):
    """Constant friction estimate from the no-load current."""
    return motor.torque_constant * motor.no_load_current


def required_motor_torque(net_torque, geom, motor, cfg):
    """Motor torque needed for a downstroke torque ``net_torque`` at contact.

    Evaluated at ``cfg.contact_angle``, where the demand peaks.
    """
    net_torque = check_positive(net_torque, "net_torque")
    m_g = gravity_torque(geom, cfg.contact_angle, cfg.gravity)
    return net_torque - m_g + friction_torque(motor)


def net_downstroke_torque(motor_torque, geom, motor, theta, g=9.81):
    """Net downstroke torque for a motor output; inverse of required_motor_torque."""
    motor_torque = check_finite(motor_torque, "motor_torque")
    return motor_torque + gravity_torque(geom, theta, g) - friction_torque(motor)


def mallet_inertia(geom):
    """Moment of inertia about the pivot: point ball at the tip plus a uniform rod."""
    return (geom.ball_mass * geom.tip_distance ** 2
            + geom.rod_mass * geom.rod_length ** 2 / 3.0)


def feasibility_check(motor, geom, cfg, net_required, max_diameter, max_depth):
    check_positive(max_diameter, "max_diameter")
    check_positive(max_depth, "max_depth")
    required = required_motor_torque(net_required, geom, motor, cfg)
    return FeasibilityReport(
        required_torque=required,
        fits_envelope=motor.diameter <= max_diameter and motor.depth <= max_depth,
        torque_ok=motor.nominal_torque >= required,
    )
