import math

import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from bldcstrike.plant import Plant, PlantFault, PlantState, plant_step

from rigs import frictionless_motor, massless_geometry

TICK = 1e-3


def test_no_forces_no_motion():
    s0 = PlantState(angle=1.0)
    s1 = plant_step(s0, 0.0, massless_geometry(), frictionless_motor(), TICK / 8)
    assert (s1.angle, s1.angular_velocity, s1.motor_current) == (1.0, 0.0, 0.0)
    assert s1.sim_time == TICK / 8


def _constant_torque_angle(dt, torque=0.1, inertia=0.01, horizon=0.05):
    p = Plant(massless_geometry(), frictionless_motor(), gravity=0.0, inertia=inertia)
    for _ in range(int(round(horizon / dt))):
        p.step(torque, dt)
    return p.theta


def test_constant_torque_kinematics():
    # 0.5 * (0.1 / 0.01) * 0.05^2
    exact = 0.0125
    assert _constant_torque_angle(TICK / 8) == pytest.approx(exact, rel=5e-3)


def test_current_follows_torque(geom, motor):
    s = plant_step(PlantState(1.0), 0.2, geom, motor, TICK / 8)
    assert s.motor_current == pytest.approx(0.2 / motor.torque_constant)


def _swing_reference(geom, inertia, gravity_moment, theta0, horizon):
    sol = solve_ivp(lambda t, y: [y[1], -gravity_moment * math.sin(y[0]) / inertia],
                    (0, horizon), [theta0, 0.0], rtol=1e-12, atol=1e-14)
    return sol.y[0, -1]


def _swing(geom, dt, theta0=math.pi / 2, horizon=0.2):
    p = Plant(geom, frictionless_motor(), 9.81, angle=theta0)
    for _ in range(int(round(horizon / dt))):
        p.step(0.0, dt)
    return p


def test_integrator_first_order(geom):
    probe = _swing(geom, TICK)
    exact = _swing_reference(geom, probe.inertia, probe.gravity_moment, math.pi / 2, 0.2)
    errors = [abs(_swing(geom, dt).theta - exact) for dt in (TICK / 4, TICK / 8, TICK / 16)]
    assert errors[0] / errors[1] >= 2.0
    assert errors[1] / errors[2] >= 2.0


def test_energy_conserved_over_a_swing(geom):
    dt = TICK / 8
    p = Plant(geom, frictionless_motor(), 9.81, angle=math.pi / 2)
    G, J = p.gravity_moment, p.inertia

    def energy():
        return 0.5 * J * p.omega ** 2 - G * math.cos(p.theta)

    e0 = energy()
    scale = G  # energy above the bottom of the swing at the start
    worst = 0.0
    # a full period at this amplitude is about 0.5 s
    for _ in range(int(0.6 / dt)):
        p.step(0.0, dt)
        worst = max(worst, abs(energy() - e0))
    assert worst / scale < 1e-3


def test_hard_stop_inelastic():
    # force-free mallet coasting at 2 rad/s onto the key
    p = Plant(massless_geometry(), frictionless_motor(), 9.81, contact_position=math.pi / 2,
              inertia=1e-3, angle=math.pi / 2 + 0.01)
    p.omega = -2.0
    impact = 0.0
    for _ in range(100):
        impact = max(impact, p.step(0.0, TICK / 8))
    assert impact == 2.0
    assert p.theta == math.pi / 2 and p.omega == 0.0
    # 0.01 rad at 2 rad/s
    assert p.impact_time == pytest.approx(0.005, abs=1e-12)


def test_resting_on_key_is_not_a_new_impact(geom):
    p = Plant(geom, frictionless_motor(), 9.81, contact_position=1.0, angle=1.0)
    assert all(p.step(-0.2, TICK / 8) == 0.0 for _ in range(20))


def test_unpowered_mallet_falls_onto_key(geom):
    motor = frictionless_motor(no_load_current=0.1)
    p = Plant(geom, motor, 9.81, contact_position=math.pi / 2, angle=math.pi / 2 + 0.04)
    hit = 0.0
    for _ in range(8000):
        hit = max(hit, p.step(0.0, TICK / 8))
    assert hit > 0 and p.theta == math.pi / 2


def test_reference_friction_exceeds_gravity(geom, motor):
    # the reference mallet is balanced so that friction wins by 3.5 mN m; at rest it stays put
    p = Plant(geom, motor, 9.81, contact_position=math.pi / 2, angle=math.pi / 2 + 0.04)
    for _ in range(800):
        p.step(0.0, TICK / 8)
    assert p.theta == math.pi / 2 + 0.04


def test_friction_holds_a_small_push(geom, motor):
    p = Plant(massless_geometry(), motor, 9.81, angle=1.0)
    p.step(0.5 * motor.torque_constant * motor.no_load_current, TICK / 8)
    assert p.omega == 0.0 and p.theta == 1.0


def test_non_finite_inputs_fault(geom, motor):
    with pytest.raises(PlantFault):
        plant_step(PlantState(math.nan), 0.0, geom, motor, TICK)
    with pytest.raises(PlantFault):
        plant_step(PlantState(1.0), math.inf, geom, motor, TICK)
    with pytest.raises(ValueError):
        plant_step(PlantState(1.0), 0.0, geom, motor, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(0.2, 2.9), st.integers(0, 2 ** 16))
def test_deterministic(torque, theta, _):
    from rigs import textbook_geometry
    geom, motor = textbook_geometry(), frictionless_motor(no_load_current=0.3)
    a = b = PlantState(theta)
    for _ in range(50):
        a = plant_step(a, torque, geom, motor, TICK / 8, contact_position=0.1)
        b = plant_step(b, torque, geom, motor, TICK / 8, contact_position=0.1)
    assert a == b
