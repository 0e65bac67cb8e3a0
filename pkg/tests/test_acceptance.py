"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are also
collected into an "acceptance criteria" section at the end of any run.
"""

import copy
import math
import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from bldcstrike import bench
from bldcstrike.controller import TickLoop, TickScheduler
from bldcstrike.gateway import NoteEvent, parse_datagram, parse_midi
from bldcstrike.mallet import (StrikeConfig, feasibility_check, net_downstroke_torque,
                               required_motor_torque)
from bldcstrike.pid import PidGains, pid_step
from bldcstrike.plant import Plant

from rigs import frictionless_motor

GOLDEN = Path(__file__).parent / "golden"
SEEDS = 100


def test_criterion_1_torque_feasibility(cfg, record_criterion):
    mm = required_motor_torque(0.3125, cfg.geometry, cfg.motor, cfg.strike)
    (dia, depth) = cfg.envelope
    report = feasibility_check(cfg.motor, cfg.geometry, cfg.strike, 0.3125, dia, depth)
    ok = abs(mm - 0.316) <= 0.001 and report.feasible
    record_criterion(1, "torque feasibility", ok,
                     f"M_m = {mm:.5f} Nm (0.316 +/- 0.001), envelope {dia * 1e3:.0f}/"
                     f"{depth * 1e3:.0f} mm, nominal {cfg.motor.nominal_torque} Nm, "
                     f"feasible={report.feasible}")
    assert ok


def test_criterion_2_bldc_dynamic_range(bldc_sweep, record_criterion):
    lo, hi = bench.spl_range(bldc_sweep)
    slope = bench.fit_intensity_line(bldc_sweep).slope
    _, means, _ = bench.per_velocity(bldc_sweep, "spl")
    # 0.1 dB is the meter's display step
    monotone = bool(np.all(np.diff(means) >= -0.1))
    strictly = bool(np.all(np.diff(means) >= 0))
    checks = (abs(lo - 57) <= 1, abs(hi - 83) <= 1, abs(slope / 1.4472e-6 - 1) <= 0.05, monotone)
    ok = all(checks)
    record_criterion(2, "BLDC dynamic range", ok,
                     f"min {lo:.2f} dB (57 +/- 1), max {hi:.2f} dB (83 +/- 1), slope "
                     f"{slope:.5e} W/m^2/step ({slope / 1.4472e-6 - 1:+.2%} of 1.4472e-06), "
                     f"monotone={monotone} (strict={strictly})")
    assert ok


@pytest.fixture(scope="module")
def solenoid_seeds(cfg):
    return [bench.run_dynamic_sweep(cfg, "solenoid", seed) for seed in range(SEEDS)]


def test_criterion_3_solenoid_dynamic_range(cfg, solenoid_seeds, bldc_sweep, record_criterion):
    lo, hi = bench.spl_range(solenoid_seeds[0])
    bldc_slope = bench.fit_intensity_line(bldc_sweep).slope
    # flatness on the mean intensity pooled over every seed
    pooled = np.mean([bench.per_velocity(r, "intensity")[1] for r in solenoid_seeds], axis=0)
    vels = np.arange(1, 128)
    above = vels > cfg.solenoid.saturation_velocity
    flat_slope = bench.fit_intensity_line(
        [bench.SweepRecord(int(v), 0, 0.0, float(y), 0) for v, y in zip(vels[above],
                                                                          pooled[above])]).slope
    flat_ratio = flat_slope / bldc_slope
    # per-velocity SPL variance, averaged over seeds, against the BLDC's
    _, _, bldc_var = bench.per_velocity(bldc_sweep, "spl")
    sol_var = np.mean([bench.per_velocity(r, "spl")[2] for r in solenoid_seeds], axis=0)
    fraction = float(np.mean(sol_var > bldc_var))
    ok = abs(lo - 73) <= 1 and abs(hi - 83) <= 1 and abs(flat_ratio) <= 0.10 and fraction >= 0.90
    record_criterion(3, "solenoid dynamic range", ok,
                     f"seed 0 min {lo:.2f} dB (73 +/- 1), max {hi:.2f} dB (83 +/- 1); "
                     f"slope above vel 80 = {flat_ratio:+.2%} of BLDC slope (|.| <= 10%, "
                     f"{SEEDS} seeds pooled); variance > BLDC in {fraction:.1%} of bins (>= 90%)")
    assert ok


def test_criterion_4_speed(cfg, record_criterion):
    bldc = bench.run_speed_sweep(cfg, "bldc", 0)
    sol = bench.run_speed_sweep(cfg, "solenoid", 0)
    ok = (abs(bldc.max_rate - 32.9) <= 1.0 and bldc.failure_mode == "power_cutoff"
          and abs(sol.max_rate - 8.3) <= 0.5 and sol.failure_mode == "fail_of_hit")
    record_criterion(4, "repetition speed", ok,
                     f"BLDC {bldc.max_rate:.1f} Hz via {bldc.failure_mode} (32.9 +/- 1.0, "
                     f"power_cutoff); solenoid {sol.max_rate:.1f} Hz via {sol.failure_mode} "
                     f"(8.3 +/- 0.5, fail_of_hit)")
    assert ok


@pytest.fixture(scope="module")
def prototype(cfg):
    return bench.build_striker(cfg, 0)


def test_criterion_5_constant_travel_time(cfg, prototype, record_criterion):
    tp = cfg.servo.tick_period
    delays, ticks = [], []
    for vel in range(1, 128):
        s = copy.deepcopy(prototype)
        loop = TickLoop({0: s}, TickScheduler())
        loop.scheduler.schedule_note(NoteEvent(loop.tick + 1, 36, vel), 0)
        events = loop.run(40)
        d = next(e for e in events if e.kind == "dispatch")
        c = next(e for e in events if e.kind in ("contact", "fault"))
        assert c.kind == "contact"
        delays.append(c.time - d.time)
        ticks.append(c.tick - d.tick)
    spread = max(delays) - min(delays)
    tick_spread = max(ticks) - min(ticks)
    ok = spread <= tp and tick_spread <= 1
    record_criterion(5, "constant travel time", ok,
                     f"contact delay {min(delays) * 1e3:.3f}..{max(delays) * 1e3:.3f} ms over "
                     f"vel 1..127, spread {spread * 1e3:.3f} ms (<= 1 tick), tick spread "
                     f"{tick_spread}")
    assert ok


@pytest.fixture(scope="module")
def eight(prototype):
    out = {}
    for k in range(8):
        s = copy.deepcopy(prototype)
        s.index = k
        out[k] = s
    return out


CHORDS = []


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.dictionaries(st.integers(0, 7), st.integers(1, 127), min_size=2, max_size=8))
def _chord_property(eight, chord):
    strikers = copy.deepcopy(eight)
    loop = TickLoop(strikers, TickScheduler())
    at = loop.tick + 2
    for idx, vel in chord.items():
        loop.scheduler.schedule_note(NoteEvent(at, 36, vel), idx)
    events = loop.run(40)
    contacts = [e for e in events if e.kind == "contact"]
    assert len(contacts) == len(chord)
    ticks = [e.tick for e in contacts]
    times = [e.time for e in contacts]
    CHORDS.append((max(ticks) - min(ticks), max(times) - min(times)))
    assert max(ticks) - min(ticks) <= 1 and max(times) - min(times) <= 1e-3


def test_criterion_6_chord_simultaneity(eight, record_criterion):
    CHORDS.clear()
    failure = None
    try:
        _chord_property(eight)
    except AssertionError as exc:
        failure = exc
    worst_ticks = max(t for t, _ in CHORDS)
    worst_time = max(s for _, s in CHORDS)
    ok = failure is None
    record_criterion(6, "chord simultaneity", ok,
                     f"{len(CHORDS)} random chords of 2-8 strikers, worst contact spread "
                     f"{worst_time * 1e3:.3f} ms / {worst_ticks} tick (<= 1 tick)")
    if failure:
        raise failure


# -- criterion 7: property suites --------------------------------------------

def _prop_round_trip():
    @settings(max_examples=300, deadline=None)
    @given(st.floats(1e-4, 10), st.floats(0, math.pi), st.floats(0, 1), st.floats(0, 1),
           st.floats(0.01, 1.0), st.floats(0, 2))
    def check(md, theta, mb, ms, km, i0):
        from bldcstrike.mallet import MalletGeometry, MotorSpec
        geom = MalletGeometry(0.01, mb, 0.3, ms)
        motor = MotorSpec(km, i0, km, 1.0, 1e-4, 0.06, 0.04)
        mm = required_motor_torque(md, geom, motor, StrikeConfig(contact_angle=theta))
        back = net_downstroke_torque(mm, geom, motor, theta)
        assert abs(back - md) <= 1e-12 * max(abs(md), abs(mm))
    check()
    return "required/net torque round trip within 1e-12 relative over 300 random rigs"


def _swing(geom, dt, horizon=0.2):
    p = Plant(geom, frictionless_motor(), 9.81, angle=math.pi / 2)
    for _ in range(int(round(horizon / dt))):
        p.step(0.0, dt)
    return p


def _prop_integrator(geom):
    from scipy.integrate import solve_ivp
    p = _swing(geom, 1e-3)
    J, G = p.inertia, p.gravity_moment
    sol = solve_ivp(lambda t, y: [y[1], -G * math.sin(y[0]) / J], (0, 0.2), [math.pi / 2, 0],
                    rtol=1e-12, atol=1e-14)
    exact = sol.y[0, -1]
    errs = [abs(_swing(geom, dt).theta - exact) for dt in (1e-3 / 8, 1e-3 / 16)]
    ratio = errs[0] / errs[1]
    assert ratio >= 2.0
    return f"halving dt divides swing error by {ratio:.6f} (>= 2)"


def _prop_energy(geom):
    dt = 1e-3 / 8
    p = Plant(geom, frictionless_motor(), 9.81, angle=math.pi / 2)
    G, J = p.gravity_moment, p.inertia
    e0 = -G * math.cos(p.theta)
    worst = 0.0
    for _ in range(int(0.6 / dt)):
        p.step(0.0, dt)
        worst = max(worst, abs(0.5 * J * p.omega ** 2 - G * math.cos(p.theta) - e0))
    rel = worst / G
    assert rel < 1e-3
    return f"gravity-only swing energy drift {rel:.2e} relative (< 1e-3)"


def _prop_pid_zero():
    @settings(max_examples=200, deadline=None)
    @given(st.floats(-10, 10), st.floats(1e-5, 1e-2), st.floats(0, 1e3), st.floats(0, 1e3))
    def check(x, dt, kp, ki):
        out, _ = pid_step(PidGains(kp, ki, 0.5, 1.0, 5.0), x, x, dt)
        assert out == 0.0
    check()
    return "PID zero error -> zero output"


def _prop_parse_round_trip():
    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 127), st.integers(1, 127), st.integers(0, 65535)),
                    max_size=255), st.integers(0, 10 ** 6),
           st.lists(st.tuples(st.integers(0, 15), st.integers(0, 127), st.integers(0, 127))))
    def check(recs, receipt, midi):
        data = b"RBMP" + bytes([1, len(recs)]) + b"".join(struct.pack(">BBH", *r) for r in recs)
        got = parse_datagram(data, receipt)
        assert [(e.pitch, e.velocity, e.tick - receipt - 1) for e in got] == recs
        raw = b"".join(bytes([0x90 | c, p, v]) for c, p, v in midi)
        assert parse_midi(raw) == [(p, v) for _, p, v in midi if v]
    check()
    return "datagram and MIDI parse round trips"


def _prop_state_machine(eight):
    @settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 150), st.integers(1, 127)),
                    min_size=1, max_size=16))
    def check(schedule):
        loop = TickLoop(copy.deepcopy(eight), TickScheduler(window=1))
        base = loop.tick + 1
        for idx, off, vel in schedule:
            loop.scheduler.schedule_note(NoteEvent(base + off, 36, vel), idx)
        events = loop.run(250)
        for idx in range(8):
            state = "idle"
            for e in (e for e in events if e.striker == idx and e.kind != "drop"):
                if e.kind == "dispatch":
                    assert state == "idle"
                    state, start = "striking", e.tick
                elif e.kind in ("contact", "fault"):
                    assert state == "striking" and e.tick - start <= 3 * 15
                    state = "lifting" if e.kind == "contact" else "faulted"
                elif e.kind == "idle":
                    assert state == "lifting"
                    state = "idle"
            assert state in ("idle", "faulted")
    check()
    return "no dispatch unless Idle; contact or fault within 3T (30 random schedules)"


def test_criterion_7_property_suites(geom, eight, record_criterion):
    suites = [_prop_round_trip, lambda: _prop_integrator(geom), lambda: _prop_energy(geom),
              _prop_pid_zero, _prop_parse_round_trip, lambda: _prop_state_machine(eight)]
    notes, failed = [], []
    for suite in suites:
        try:
            notes.append(suite())
        except AssertionError as exc:
            failed.append(exc)
            notes.append(f"FAILED {exc!s:.80}")
    ok = not failed
    record_criterion(7, "property suites", ok, "; ".join(notes))
    if failed:
        raise failed[0]


def test_criterion_8_determinism(cfg, bldc_sweep, solenoid_sweep, record_criterion):
    results = []
    for actuator, first in (("bldc", bldc_sweep), ("solenoid", solenoid_sweep)):
        again = bench.format_csv(bench.run_dynamic_sweep(cfg, actuator, 0))
        golden = (GOLDEN / f"sweep_{actuator}_seed0.csv").read_text()
        results.append((actuator, bench.format_csv(first) == again == golden))
    ok = all(same for _, same in results)
    record_criterion(8, "determinism", ok, ", ".join(
        f"{a} rerun == golden: {same}" for a, same in results))
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
