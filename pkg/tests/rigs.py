"""Small rigs shared by the test modules."""

from bldcstrike.mallet import MalletGeometry, MotorSpec, StrikeConfig


def textbook_geometry():
    return MalletGeometry(ball_radius=0.015, ball_mass=0.03, rod_length=0.35, rod_mass=0.02)


def massless_geometry():
    return MalletGeometry(ball_radius=0.015, ball_mass=0.0, rod_length=0.35, rod_mass=0.0)


def frictionless_motor(**kw):
    base = dict(torque_constant=0.0524, no_load_current=0.0, nominal_torque=0.319,
                max_current=20.0, rotor_inertia=1.21e-4, diameter=0.065, depth=0.038)
    base.update(kw)
    return MotorSpec(**base)


HORIZONTAL = StrikeConfig()
