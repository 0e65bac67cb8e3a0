import numpy as np
import pytest
from hypothesis import given, strategies as st

from bldcstrike.controller import OrderingError, StrikerStatus, TickLoop, TickScheduler
from bldcstrike.gateway import NoteEvent
from bldcstrike.solenoid import SolenoidSpec, SolenoidStriker, mean_impact_speed, solenoid_step


@pytest.fixture
def spec(cfg):
    return cfg.solenoid


def test_noiseless_is_affine_below_saturation(spec):
    quiet = SolenoidSpec(**{**spec.__dict__, "noise_sigma": 0.0})
    speeds = [solenoid_step(quiet, v, 0) for v in range(1, 80)]
    assert np.allclose(np.diff(speeds, 2), 0.0, atol=1e-12)
    assert speeds[0] == quiet.floor_speed
    assert solenoid_step(quiet, 80, 0) == pytest.approx(quiet.saturation_speed)


def test_saturated_means_equal(spec):
    assert mean_impact_speed(spec, 90) == mean_impact_speed(spec, 127) == spec.saturation_speed


def test_noise_is_unit_mean(spec):
    rng = np.random.default_rng(0)
    draws = np.array([solenoid_step(spec, 100, rng) for _ in range(20000)])
    ratio = draws / spec.saturation_speed
    assert ratio.mean() == pytest.approx(1.0, abs=0.005)
    assert np.log(ratio).std() == pytest.approx(spec.noise_sigma, rel=0.03)


@given(st.integers(1, 127), st.integers(0, 2 ** 32 - 1))
def test_seeded_draws_repeat(vel, seed):
    spec = SolenoidSpec(max_force_torque=0.12, floor_speed=0.75)
    assert solenoid_step(spec, vel, seed) == solenoid_step(spec, vel, seed)


def test_spec_invariants():
    with pytest.raises(ValueError):
        SolenoidSpec(max_force_torque=0.1, saturation_velocity=0)
    with pytest.raises(ValueError):
        SolenoidSpec(max_force_torque=0.1, noise_sigma=-0.1)
    with pytest.raises(ValueError):
        SolenoidSpec(max_force_torque=0.1, floor_speed=100.0)


def test_stroke_timeline(spec):
    s = SolenoidStriker(0, spec, 1)
    with pytest.raises(OrderingError):
        s.dispatch(10, 0)
    s.home()
    loop = TickLoop({0: s}, TickScheduler(window=1))
    loop.scheduler.schedule_note(NoteEvent(10, 36, 64), 0)
    loop.scheduler.schedule_note(NoteEvent(60, 36, 64), 0)
    events = loop.run(200)
    kinds = [(e.tick, e.kind) for e in events]
    # 30 ms drive, 90 ms return; the second note arrives while the plunger is out
    assert kinds == [(10, "dispatch"), (40, "contact"), (60, "drop"), (130, "idle")]
    assert s.status is StrikerStatus.IDLE
